//! The BBGKY hierarchy for reduced bosonic dynamics and its pure-product
//! truncation.
//!
//! Tracing the von Neumann equation over N-M particles couples ρ^(M) to
//! ρ^(M+1):
//!
//! ```text
//! i ∂ρ^(M)/∂t = [H⁽¹⁾ + (1-(N-M)) H⁽²⁾, ρ^(M)]
//!             + (N-M) Tr₁^{(M+1)} [H⁽²⁾, ρ^(M+1)]     (ħ = 1)
//! ```
//!
//! Closing the hierarchy with the pure product (condensate) ansatz turns
//! the trace term into the nonlinear potential C⁽¹⁾(ρ⁽¹⁾) and, for M = 1
//! pure states, into the nonlinear mean-field Schrödinger equation
//! i ∂Φ/∂t = [H⁽¹⁾ + (N-1) C⁽¹⁾(Φ)] Φ. With an on-site contact
//! interaction on a lattice this is the (discrete) Gross-Pitaevskii
//! equation, which is also provided as a direct stencil integrator.

use crate::error::{Error, Result};
use crate::exact::{Hamiltonian, TimeGrid};
use crate::linalg::{self, CMatrix, CVector, C64, I};
use crate::second_quant::{embed_one_body, embed_two_body, OneBodyOperator, TwoBodyOperator};
use crate::subsystem::{partial_trace, partial_trace_map, DensityMatrix};
use crate::tol;

/// A normalized single-particle state |Φ⟩ over d modes (or lattice sites).
#[derive(Debug, Clone)]
pub struct MeanFieldState {
    phi: CVector,
}

impl MeanFieldState {
    pub fn new(phi: CVector) -> Result<Self> {
        let dev = (phi.norm() - 1.0).abs();
        if dev > tol::AMPLITUDE_NORM {
            return Err(Error::NotNormalized { deviation: dev });
        }
        Ok(MeanFieldState { phi })
    }

    pub(crate) fn new_unchecked(phi: CVector) -> Self {
        MeanFieldState { phi }
    }

    pub fn d(&self) -> usize {
        self.phi.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.phi
    }

    pub fn norm(&self) -> f64 {
        self.phi.norm()
    }

    /// |Φ⟩⟨Φ| as a single-particle density matrix.
    pub fn density(&self) -> CMatrix {
        &self.phi * self.phi.adjoint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Open,
}

/// A 1D lattice discretization: 3-point kinetic stencil with hopping
/// J = 1/(2 m a²), linear tilt (energy per site), and on-site contact
/// interaction g.
#[derive(Debug, Clone, Copy)]
pub struct LatticeConfig {
    pub sites: usize,
    pub spacing: f64,
    pub boundary: Boundary,
    pub tilt: f64,
    pub onsite_g: f64,
    pub mass: f64,
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidGrid {
                reason: format!("lattice needs >= 2 sites, got {}", self.sites),
            });
        }
        if self.spacing <= 0.0 || !self.spacing.is_finite() {
            return Err(Error::InvalidGrid {
                reason: format!("lattice spacing {} <= 0", self.spacing),
            });
        }
        if self.mass <= 0.0 || !self.mass.is_finite() {
            return Err(Error::InvalidGrid {
                reason: format!("mass {} <= 0", self.mass),
            });
        }
        Ok(())
    }

    /// Hopping energy of the kinetic stencil, J = 1/(2 m a²).
    pub fn hopping(&self) -> f64 {
        1.0 / (2.0 * self.mass * self.spacing * self.spacing)
    }

    /// -(1/2m)∇² + V₀ as a one-body matrix: diagonal 2J + tilt·x,
    /// off-diagonal -J between stencil neighbors.
    pub fn one_body(&self) -> OneBodyOperator {
        let d = self.sites;
        let j = self.hopping();
        let mut h = CMatrix::zeros(d, d);
        for x in 0..d {
            h[(x, x)] += C64::new(2.0 * j + self.tilt * x as f64, 0.0);
            let right = if x + 1 < d {
                Some(x + 1)
            } else if self.boundary == Boundary::Periodic {
                Some(0)
            } else {
                None
            };
            if let Some(r) = right {
                h[(x, r)] += C64::new(-j, 0.0);
                h[(r, x)] += C64::new(-j, 0.0);
            }
        }
        OneBodyOperator::new(h)
    }

    pub fn two_body(&self) -> TwoBodyOperator {
        TwoBodyOperator::contact(self.sites, self.onsite_g)
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        self.validate()?;
        Hamiltonian::new(self.one_body(), self.two_body())
    }
}

/// Open tight-binding chain with hopping -j and on-site contact u; the
/// standard desk-scale Bose-Hubbard benchmark.
pub fn hubbard_chain(sites: usize, j: f64, u: f64) -> Result<Hamiltonian> {
    let mut h = CMatrix::zeros(sites, sites);
    for x in 0..sites.saturating_sub(1) {
        h[(x, x + 1)] = C64::new(-j, 0.0);
        h[(x + 1, x)] = C64::new(-j, 0.0);
    }
    Hamiltonian::new(OneBodyOperator::new(h), TwoBodyOperator::contact(sites, u))
}

/// The hierarchy right-hand side: i ∂ρ^(M)/∂t of the boxed equation in
/// the module docs, as a matrix over the (d, M) sector. The output is
/// traceless and anti-Hermitian (i × Hermitian).
///
/// `rho_mp1` is accepted as data; no closure is synthesized here. A
/// warning is logged when its partial trace disagrees with `rho_m`.
pub fn bbgky_rhs(
    m: usize,
    rho_m: &DensityMatrix,
    rho_mp1: &DensityMatrix,
    h: &Hamiltonian,
    n: usize,
) -> Result<CMatrix> {
    if m < 1 || m >= n {
        return Err(Error::InvalidSubsystem { m, n });
    }
    let d = h.d();
    let bm = rho_m.basis();
    let bm1 = rho_mp1.basis();
    if bm.d() != d || bm1.d() != d {
        return Err(Error::ModeCountMismatch {
            left: bm.d(),
            right: d,
        });
    }
    if bm.n() != m || bm1.n() != m + 1 {
        return Err(Error::SectorMismatch {
            d_left: bm.d(),
            n_left: bm.n(),
            d_right: bm1.d(),
            n_right: bm1.n(),
        });
    }
    let consistency = linalg::max_abs(&(partial_trace(rho_mp1, m)?.matrix() - rho_m.matrix()));
    if consistency > tol::HIERARCHY_CONSISTENCY {
        log::warn!(
            "bbgky_rhs: partial trace of rho^(M+1) deviates from rho^(M) by {consistency:.3e}"
        );
    }
    let h1m = embed_one_body(h.one_body(), bm)?;
    let h2m = embed_two_body(h.two_body(), bm)?;
    let h2m1 = embed_two_body(h.two_body(), bm1)?;
    let nm = (n - m) as f64;
    let coherent = h1m.matrix() + h2m.matrix() * C64::new(1.0 - nm, 0.0);
    let comm_m = linalg::commutator(&coherent, rho_m.matrix());
    let comm_m1 = linalg::commutator(h2m1.matrix(), rho_mp1.matrix());
    let traced = partial_trace_map(
        &crate::second_quant::SectorOperator::new(bm1.clone(), comm_m1)?,
        m,
    )?;
    Ok(comm_m + traced.matrix() * C64::new(nm, 0.0))
}

/// The mean-field potential C⁽¹⁾ = Σ_{nm} (Σ_{ij} v_{nj;im} ρ⁽¹⁾_ij) a†_n a_m;
/// Hermitian for Hermitian v and ρ.
pub fn mean_field_potential(rho1: &CMatrix, h2: &TwoBodyOperator) -> Result<OneBodyOperator> {
    let d = h2.d();
    if rho1.nrows() != d || rho1.ncols() != d {
        return Err(Error::ModeCountMismatch {
            left: rho1.nrows(),
            right: d,
        });
    }
    let mut c = CMatrix::zeros(d, d);
    for nn in 0..d {
        for mm in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc += h2.element(nn, j, i, mm) * rho1[(i, j)];
                }
            }
            c[(nn, mm)] = acc;
        }
    }
    Ok(OneBodyOperator::new(c))
}

/// The interaction-picture potential C_I⁽¹⁾(t₁, ·): the two-body tensor is
/// rotated to time t₁ and contracted with the supplied (already
/// interaction-picture) single-particle matrix.
pub fn mean_field_potential_interaction(
    t1: f64,
    rho1_i: &CMatrix,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
) -> Result<OneBodyOperator> {
    let u = crate::exact::single_particle_propagator(h1, t1);
    mean_field_potential(rho1_i, &h2.rotated(&u))
}

/// Integrates i φ' = rhs_h(φ, t)·φ by fixed-step RK4 with step halving
/// until successive refinements of the whole trajectory agree to
/// [`tol::STEP_REFINEMENT`].
fn integrate_nonlinear(
    phi0: &CVector,
    grid: &TimeGrid,
    h_phi: &dyn Fn(&CVector) -> CVector,
    h_norm: f64,
) -> Result<Vec<(f64, CVector)>> {
    let times = grid.times();
    let span = grid.t1() - grid.t0();
    if span == 0.0 {
        return Ok(times.iter().map(|&t| (t, phi0.clone())).collect());
    }
    let dt0 = tol::STEP_FACTOR / h_norm.max(1e-12);
    let run = |substeps_per_interval: usize| -> Vec<(f64, CVector)> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = phi0.clone();
        out.push((times[0], cur.clone()));
        for pair in times.windows(2) {
            let dt = (pair[1] - pair[0]) / substeps_per_interval as f64;
            for _ in 0..substeps_per_interval {
                cur = rk4_vec(h_phi, &cur, dt);
            }
            out.push((pair[1], cur.clone()));
        }
        out
    };
    let interval = span / (times.len() - 1) as f64;
    let mut nsub = (interval / dt0).ceil().max(1.0) as usize;
    let mut prev = run(nsub);
    for _ in 0..14 {
        nsub *= 2;
        let next = run(nsub);
        let diff = prev
            .iter()
            .zip(&next)
            .map(|((_, a), (_, b))| (a - b).norm())
            .fold(0.0, f64::max);
        prev = next;
        if diff < tol::STEP_REFINEMENT {
            let drift = prev
                .iter()
                .map(|(_, v)| (v.norm() - 1.0).abs())
                .fold(0.0, f64::max);
            if drift > tol::STEP_REFINEMENT * 10.0 * span.max(1.0) {
                return Err(Error::PropagationDrift {
                    reason: format!("norm drift {drift:.3e} over span {span}"),
                });
            }
            return Ok(prev);
        }
    }
    Err(Error::StepRefinementFailed {
        reason: format!(
            "snapshot change above {} after 14 halvings",
            tol::STEP_REFINEMENT
        ),
    })
}

fn rk4_vec(h_phi: &dyn Fn(&CVector) -> CVector, y: &CVector, dt: f64) -> CVector {
    let f = |v: &CVector| -> CVector { h_phi(v) * (-I) };
    let half = C64::new(0.5 * dt, 0.0);
    let k1 = f(y);
    let k2 = f(&(y + &k1 * half));
    let k3 = f(&(y + &k2 * half));
    let k4 = f(&(y + &k3 * C64::new(dt, 0.0)));
    y + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
}

/// Propagates the nonlinear mean-field Schrödinger equation
/// i ∂Φ/∂t = [H⁽¹⁾ + (N-1) C⁽¹⁾(Φ)] Φ and returns snapshots on the grid.
pub fn propagate_mean_field(
    phi0: &MeanFieldState,
    h: &Hamiltonian,
    n: usize,
    grid: &TimeGrid,
) -> Result<Vec<(f64, MeanFieldState)>> {
    let d = h.d();
    if phi0.d() != d {
        return Err(Error::ModeCountMismatch {
            left: phi0.d(),
            right: d,
        });
    }
    let factor = C64::new((n.max(1) - 1) as f64, 0.0);
    let h1 = h.one_body().coeffs().clone();
    let h2 = h.two_body().clone();
    let h_phi = move |phi: &CVector| -> CVector {
        let rho = phi * phi.adjoint();
        let c = mean_field_potential(&rho, &h2)
            .expect("dims checked")
            .coeffs()
            .clone();
        (&h1 + c * factor) * phi
    };
    let h_eff0 = h.one_body().coeffs()
        + mean_field_potential(&phi0.density(), h.two_body())?.coeffs() * factor;
    let h_norm = linalg::eigenvalues_hermitian(&h_eff0)
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let traj = integrate_nonlinear(phi0.amplitudes(), grid, &h_phi, h_norm)?;
    Ok(traj
        .into_iter()
        .map(|(t, v)| (t, MeanFieldState::new_unchecked(v)))
        .collect())
}

/// Propagates the discrete Gross-Pitaevskii equation
/// i ∂Φ_x/∂t = [-J(Φ_{x+1} - 2Φ_x + Φ_{x-1}) + V_x Φ_x
///             + g(N-1)|Φ_x|² Φ_x]
/// directly through the 3-point stencil (no sector machinery); agrees
/// with [`propagate_mean_field`] on the equivalent tight-binding
/// Hamiltonian.
pub fn propagate_gpe(
    lattice: &LatticeConfig,
    phi0: &MeanFieldState,
    n: usize,
    grid: &TimeGrid,
) -> Result<Vec<(f64, MeanFieldState)>> {
    lattice.validate()?;
    let d = lattice.sites;
    if phi0.d() != d {
        return Err(Error::ModeCountMismatch {
            left: phi0.d(),
            right: d,
        });
    }
    let j = lattice.hopping();
    let tilt = lattice.tilt;
    let g_eff = lattice.onsite_g * (n.max(1) - 1) as f64;
    let periodic = lattice.boundary == Boundary::Periodic;
    let h_phi = move |phi: &CVector| -> CVector {
        let zero = C64::new(0.0, 0.0);
        CVector::from_fn(d, |x, _| {
            let right = if x + 1 < d {
                phi[x + 1]
            } else if periodic {
                phi[0]
            } else {
                zero
            };
            let left = if x > 0 {
                phi[x - 1]
            } else if periodic {
                phi[d - 1]
            } else {
                zero
            };
            let lap = right + left - phi[x] * 2.0;
            -lap * j + phi[x] * (tilt * x as f64 + g_eff * phi[x].norm_sqr())
        })
    };
    let h_norm = 4.0 * j + tilt * (d - 1) as f64 + g_eff.abs();
    let traj = integrate_nonlinear(phi0.amplitudes(), grid, &h_phi, h_norm)?;
    Ok(traj
        .into_iter()
        .map(|(t, v)| (t, MeanFieldState::new_unchecked(v)))
        .collect())
}

/// Per-particle mean-field energy functional
/// ⟨Φ|h⁽¹⁾|Φ⟩ + ((N-1)/2) Σ v_{ij;kl} Φ*_i Φ*_j Φ_k Φ_l,
/// conserved along mean-field trajectories.
pub fn mean_field_energy(h: &Hamiltonian, phi: &MeanFieldState, n: usize) -> f64 {
    let v = phi.amplitudes();
    let one = (v.adjoint() * h.one_body().coeffs() * v)[(0, 0)].re;
    let d = h.d();
    let mut two = C64::new(0.0, 0.0);
    for i in 0..d {
        for jj in 0..d {
            for k in 0..d {
                for l in 0..d {
                    two += v[i].conj()
                        * v[jj].conj()
                        * h.two_body().element(i, jj, k, l)
                        * v[k]
                        * v[l];
                }
            }
        }
    }
    one + 0.5 * (n.max(1) - 1) as f64 * two.re
}

/// The GPE energy functional (kinetic + potential + ½ g(N-1) Σ|Φ|⁴),
/// evaluated through the stencil.
pub fn gpe_energy(lattice: &LatticeConfig, phi: &MeanFieldState, n: usize) -> f64 {
    let d = lattice.sites;
    let j = lattice.hopping();
    let v = phi.amplitudes();
    let periodic = lattice.boundary == Boundary::Periodic;
    let mut e = 0.0;
    for x in 0..d {
        let zero = C64::new(0.0, 0.0);
        let right = if x + 1 < d {
            v[x + 1]
        } else if periodic {
            v[0]
        } else {
            zero
        };
        let left = if x > 0 {
            v[x - 1]
        } else if periodic {
            v[d - 1]
        } else {
            zero
        };
        let lap = right + left - v[x] * 2.0;
        e += (v[x].conj() * (-lap * j)).re;
        e += lattice.tilt * x as f64 * v[x].norm_sqr();
        e += 0.5 * lattice.onsite_g * (n.max(1) - 1) as f64 * v[x].norm_sqr().powi(2);
    }
    e
}

/// Fixed-point iteration for a self-consistent mean-field eigenstate:
/// Φ is the lowest eigenvector of H⁽¹⁾ + (N-1)C⁽¹⁾(Φ). Test helper for
/// stationarity checks. Returns the state and its eigenvalue.
pub fn self_consistent_ground_state(
    h: &Hamiltonian,
    n: usize,
    iterations: usize,
) -> Result<(MeanFieldState, f64)> {
    let d = h.d();
    let factor = C64::new((n.max(1) - 1) as f64, 0.0);
    let mut phi = CVector::from_element(d, C64::new(1.0 / (d as f64).sqrt(), 0.0));
    let mut mu = 0.0;
    for _ in 0..iterations {
        let rho = &phi * phi.adjoint();
        let heff =
            h.one_body().coeffs() + mean_field_potential(&rho, h.two_body())?.coeffs() * factor;
        let (w, vmat) = linalg::hermitian_eigen(&heff);
        mu = w[0];
        let mut ground = vmat.column(0).into_owned();
        // eigenvectors come with an arbitrary global phase; align before mixing
        let overlap = phi.dotc(&ground);
        if overlap.norm() > 1e-14 {
            ground *= (overlap / overlap.norm()).conj();
        }
        let mixed = &phi * C64::new(0.5, 0.0) + ground * C64::new(0.5, 0.0);
        phi = &mixed / C64::new(mixed.norm(), 0.0);
        let resid = (&heff * &phi - &phi * C64::new(mu, 0.0)).norm();
        if resid < 1e-13 {
            break;
        }
    }
    Ok((MeanFieldState::new(phi)?, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::sector;
    use crate::linalg::max_abs;
    use crate::sample;
    use crate::second_quant::SectorOperator;
    use crate::subsystem::product_state_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coherent_limit_without_interaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 3;
        let h = Hamiltonian::new(sample::one_body(&mut rng, 3), TwoBodyOperator::zero(3)).unwrap();
        let b1 = sector(3, 1).unwrap();
        let b2 = sector(3, 2).unwrap();
        let rho1 = sample::density(&mut rng, &b1);
        let rho2 = sample::density(&mut rng, &b2);
        let rhs = bbgky_rhs(1, &rho1, &rho2, &h, n).unwrap();
        let h1m = embed_one_body(h.one_body(), &b1).unwrap();
        let expect = linalg::commutator(h1m.matrix(), rho1.matrix());
        assert!(max_abs(&(rhs - expect)) < 1e-12);
    }

    #[test]
    fn hierarchy_top_matches_traced_von_neumann() {
        // M = N-1: the RHS is the partial trace of the full commutator
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let n = 3;
        let h =
            Hamiltonian::new(sample::one_body(&mut rng, 3), sample::two_body(&mut rng, 3)).unwrap();
        let bn = sector(3, n).unwrap();
        let rho_n = sample::density(&mut rng, &bn);
        let rho_m = crate::subsystem::partial_trace(&rho_n, n - 1).unwrap();
        let rhs = bbgky_rhs(n - 1, &rho_m, &rho_n, &h, n).unwrap();
        let hm = h.sector_matrix(&bn).unwrap();
        let full_comm = linalg::commutator(hm.matrix(), rho_n.matrix());
        let traced =
            partial_trace_map(&SectorOperator::new(bn.clone(), full_comm).unwrap(), n - 1).unwrap();
        assert!(max_abs(&(rhs - traced.matrix())) < 1e-10);
    }

    #[test]
    fn rhs_is_traceless_and_anti_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 3;
        let h =
            Hamiltonian::new(sample::one_body(&mut rng, 3), sample::two_body(&mut rng, 3)).unwrap();
        let bn = sector(3, n).unwrap();
        let rho_n = sample::density(&mut rng, &bn);
        for m in 1..n {
            let rho_m = crate::subsystem::partial_trace(&rho_n, m).unwrap();
            let rho_m1 = crate::subsystem::partial_trace(&rho_n, m + 1).unwrap();
            let rhs = bbgky_rhs(m, &rho_m, &rho_m1, &h, n).unwrap();
            assert!(linalg::trace(&rhs).norm() < 1e-12);
            assert!(max_abs(&(&rhs + rhs.adjoint())) < 1e-12); // X† = -X
        }
    }

    #[test]
    fn product_closure_reproduces_mean_field_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let n = 3;
        let d = 3;
        let h =
            Hamiltonian::new(sample::one_body(&mut rng, d), sample::two_body(&mut rng, d)).unwrap();
        let c = sample::product_amplitudes(&mut rng, d);
        for m in 1..n {
            let bm = sector(d, m).unwrap();
            let bm1 = sector(d, m + 1).unwrap();
            let rho_m = product_state_density(&c, &bm).unwrap();
            let rho_m1 = product_state_density(&c, &bm1).unwrap();
            let rhs = bbgky_rhs(m, &rho_m, &rho_m1, &h, n).unwrap();
            let rho1 = {
                let b1 = sector(d, 1).unwrap();
                product_state_density(&c, &b1).unwrap()
            };
            let cpot = mean_field_potential(rho1.matrix(), h.two_body()).unwrap();
            let gen = embed_one_body(h.one_body(), &bm).unwrap().into_matrix()
                + embed_two_body(h.two_body(), &bm).unwrap().into_matrix()
                + embed_one_body(&cpot, &bm).unwrap().into_matrix() * C64::new((n - m) as f64, 0.0);
            let expect = linalg::commutator(&gen, rho_m.matrix());
            assert!(max_abs(&(rhs - expect)) < 1e-10, "m={m}");
        }
    }

    #[test]
    fn bbgky_matches_finite_difference_of_exact_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let n = 3;
        let h = hubbard_chain(3, 1.0, 0.7).unwrap();
        let bn = sector(3, n).unwrap();
        let rho0 = sample::density(&mut rng, &bn);
        let t = 0.4;
        let dt = 1e-4;
        let state_at = |tt: f64| {
            let g = TimeGrid::new(0.0, tt, tt).unwrap();
            crate::exact::propagate_von_neumann(&h, &rho0, &g)
                .unwrap()
                .states
                .pop()
                .unwrap()
        };
        let plus = state_at(t + dt);
        let minus = state_at(t - dt);
        let center = state_at(t);
        let m = 1;
        let fd = (crate::subsystem::partial_trace(&plus, m).unwrap().matrix()
            - crate::subsystem::partial_trace(&minus, m).unwrap().matrix())
            / C64::new(2.0 * dt, 0.0);
        let rho_m = crate::subsystem::partial_trace(&center, m).unwrap();
        let rho_m1 = crate::subsystem::partial_trace(&center, m + 1).unwrap();
        let rhs = bbgky_rhs(m, &rho_m, &rho_m1, &h, n).unwrap() / I;
        let rel = linalg::frobenius(&(fd - &rhs)) / linalg::frobenius(&rhs);
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn mean_field_potential_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let d = 3;
        let rho = sample::density(&mut rng, &sector(d, 1).unwrap());
        // no interaction: zero potential
        let c = mean_field_potential(rho.matrix(), &TwoBodyOperator::zero(d)).unwrap();
        assert!(max_abs(c.coeffs()) < 1e-15);
        // contact interaction on a pure state: diagonal g|Φ_x|²
        let phi = sample::pure_vector(&mut rng, d);
        let pure = &phi * phi.adjoint();
        let g = 0.9;
        let c = mean_field_potential(&pure, &TwoBodyOperator::contact(d, g)).unwrap();
        for x in 0..d {
            for y in 0..d {
                let expect = if x == y { g * phi[x].norm_sqr() } else { 0.0 };
                assert!((c.coeffs()[(x, y)] - C64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
        // Hermiticity on random input
        let v = sample::two_body(&mut rng, d);
        let c = mean_field_potential(rho.matrix(), &v).unwrap();
        assert!(c.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn interaction_picture_potential_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let d = 3;
        let h1 = sample::one_body(&mut rng, d);
        let h2 = sample::two_body(&mut rng, d);
        let rho = sample::density(&mut rng, &sector(d, 1).unwrap());
        // t1 = 0 reduces to the Schrödinger-picture potential
        let c0 = mean_field_potential_interaction(0.0, rho.matrix(), &h2, &h1).unwrap();
        let cs = mean_field_potential(rho.matrix(), &h2).unwrap();
        assert!(max_abs(&(c0.coeffs() - cs.coeffs())) < 1e-13);
        // covariance: u C_I u† = C(u ρ_I u†)
        let t = 0.8;
        let u = crate::exact::single_particle_propagator(&h1, t);
        let rho_i = u.adjoint() * rho.matrix() * &u;
        let ci = mean_field_potential_interaction(t, &rho_i, &h2, &h1).unwrap();
        let back = &u * ci.coeffs() * u.adjoint();
        let direct = mean_field_potential(rho.matrix(), &h2).unwrap();
        assert!(max_abs(&(back - direct.coeffs())) < 1e-12);
        // commuting h2: time-independent potential
        let h1_diag = OneBodyOperator::new(CMatrix::from_fn(d, d, |r, c| {
            if r == c {
                C64::new(1.0 + r as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }));
        let contact = TwoBodyOperator::contact(d, 0.6);
        let c_t = mean_field_potential_interaction(1.1, rho.matrix(), &contact, &h1_diag).unwrap();
        let c_0 = mean_field_potential(rho.matrix(), &contact).unwrap();
        assert!(max_abs(&(c_t.coeffs() - c_0.coeffs())) < 1e-12);
    }

    #[test]
    fn mean_field_linear_limit_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let d = 3;
        let h = Hamiltonian::new(sample::one_body(&mut rng, d), TwoBodyOperator::zero(d)).unwrap();
        let phi0 = MeanFieldState::new(sample::pure_vector(&mut rng, d)).unwrap();
        let grid = TimeGrid::from_zero(2.0, 0.5).unwrap();
        let traj = propagate_mean_field(&phi0, &h, 3, &grid).unwrap();
        for (t, state) in &traj {
            let u = crate::exact::single_particle_propagator(h.one_body(), *t);
            let expect = &u * phi0.amplitudes();
            assert!((state.amplitudes() - expect).norm() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn self_consistent_state_is_stationary() {
        let h = hubbard_chain(3, 1.0, 0.4).unwrap();
        let n = 3;
        let (phi, _mu) = self_consistent_ground_state(&h, n, 400).unwrap();
        let grid = TimeGrid::from_zero(1.0, 0.25).unwrap();
        let traj = propagate_mean_field(&phi, &h, n, &grid).unwrap();
        for (t, state) in &traj {
            let overlap = phi.amplitudes().dotc(state.amplitudes()).norm();
            assert!((overlap - 1.0).abs() < 1e-7, "t={t}: overlap {overlap}");
        }
    }

    #[test]
    fn global_phase_gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let h = hubbard_chain(3, 1.0, 0.5).unwrap();
        let phi0 = MeanFieldState::new(sample::pure_vector(&mut rng, 3)).unwrap();
        let theta = C64::new(0.0, 0.83).exp();
        let phi0_rot = MeanFieldState::new(phi0.amplitudes() * theta).unwrap();
        let grid = TimeGrid::from_zero(0.8, 0.4).unwrap();
        let a = propagate_mean_field(&phi0, &h, 3, &grid).unwrap();
        let b = propagate_mean_field(&phi0_rot, &h, 3, &grid).unwrap();
        for ((_, sa), (_, sb)) in a.iter().zip(&b) {
            assert!((sa.amplitudes() * theta - sb.amplitudes()).norm() < 1e-9);
            assert!(max_abs(&(sa.density() - sb.density())) < 1e-12);
        }
    }

    #[test]
    fn gpe_plane_wave_phase_evolution() {
        // g = 0, periodic: plane wave picks up exp(-i E_k t),
        // E_k = 2J(1 - cos(2πk/d))
        let lattice = LatticeConfig {
            sites: 6,
            spacing: 1.0,
            boundary: Boundary::Periodic,
            tilt: 0.0,
            onsite_g: 0.0,
            mass: 0.5,
        };
        let d = lattice.sites;
        let k = 2;
        let phase = C64::new(0.0, std::f64::consts::TAU * k as f64 / d as f64).exp();
        let phi0 = MeanFieldState::new(CVector::from_fn(d, |x, _| {
            phase.powu(x as u32) / C64::new((d as f64).sqrt(), 0.0)
        }))
        .unwrap();
        let grid = TimeGrid::from_zero(1.5, 0.5).unwrap();
        let traj = propagate_gpe(&lattice, &phi0, 2, &grid).unwrap();
        let j = lattice.hopping();
        let ek = 2.0 * j * (1.0 - (std::f64::consts::TAU * k as f64 / d as f64).cos());
        for (t, state) in &traj {
            let expect = phi0.amplitudes() * (-I * ek * *t).exp();
            assert!((state.amplitudes() - expect).norm() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn gpe_uniform_state_only_rotates_globally() {
        let lattice = LatticeConfig {
            sites: 5,
            spacing: 1.0,
            boundary: Boundary::Periodic,
            tilt: 0.0,
            onsite_g: 0.7,
            mass: 1.0,
        };
        let d = lattice.sites;
        let n = 4;
        let phi0 = MeanFieldState::new(CVector::from_element(
            d,
            C64::new(1.0 / (d as f64).sqrt(), 0.0),
        ))
        .unwrap();
        let rate = lattice.onsite_g * (n - 1) as f64 / d as f64; // E₀ = 0 on the ring
        let grid = TimeGrid::from_zero(1.2, 0.4).unwrap();
        let traj = propagate_gpe(&lattice, &phi0, n, &grid).unwrap();
        for (t, state) in &traj {
            let expect = phi0.amplitudes() * (-I * rate * *t).exp();
            assert!((state.amplitudes() - expect).norm() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn gpe_matches_matrix_mean_field() {
        let lattice = LatticeConfig {
            sites: 5,
            spacing: 0.8,
            boundary: Boundary::Open,
            tilt: 0.3,
            onsite_g: 0.5,
            mass: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let phi0 = MeanFieldState::new(sample::pure_vector(&mut rng, 5)).unwrap();
        let n = 3;
        let grid = TimeGrid::from_zero(1.0, 0.25).unwrap();
        let gpe = propagate_gpe(&lattice, &phi0, n, &grid).unwrap();
        let h = lattice.hamiltonian().unwrap();
        let mf = propagate_mean_field(&phi0, &h, n, &grid).unwrap();
        for ((t, a), (_, b)) in gpe.iter().zip(&mf) {
            assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn gpe_conserves_energy_and_norm() {
        let lattice = LatticeConfig {
            sites: 6,
            spacing: 1.0,
            boundary: Boundary::Periodic,
            tilt: 0.0,
            onsite_g: 0.8,
            mass: 0.7,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let phi0 = MeanFieldState::new(sample::pure_vector(&mut rng, 6)).unwrap();
        let n = 3;
        let grid = TimeGrid::from_zero(2.0, 0.5).unwrap();
        let traj = propagate_gpe(&lattice, &phi0, n, &grid).unwrap();
        let e0 = gpe_energy(&lattice, &phi0, n);
        for (t, state) in &traj {
            assert!((state.norm() - 1.0).abs() < 1e-9, "norm at t={t}");
            let e = gpe_energy(&lattice, state, n);
            assert!((e - e0).abs() < 1e-8, "energy drift {} at t={t}", e - e0);
        }
    }

    #[test]
    fn rejects_bad_subsystem_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = hubbard_chain(3, 1.0, 0.2).unwrap();
        let b1 = sector(3, 1).unwrap();
        let b2 = sector(3, 2).unwrap();
        let rho1 = sample::density(&mut rng, &b1);
        let rho2 = sample::density(&mut rng, &b2);
        assert!(bbgky_rhs(2, &rho2, &rho1, &h, 2).is_err()); // m = n
        assert!(bbgky_rhs(1, &rho2, &rho1, &h, 3).is_err()); // wrong sectors
    }
}
