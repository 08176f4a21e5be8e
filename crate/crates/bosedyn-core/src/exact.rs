//! Exact propagation of the N-particle von Neumann equation,
//! ∂ρ/∂t = -i[H, ρ] (ħ = 1), and interaction-picture transformations.
//!
//! The default propagator diagonalizes the sector Hamiltonian once and
//! applies ρ(t) = U ρ₀ U†, exact up to diagonalization error, so it can
//! serve as the oracle for the approximate schemes. A fixed-step RK4
//! integrator of the same equation is kept for cross-validation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::SectorBasis;
use crate::linalg::{self, CMatrix, CVector, C64, I};
use crate::second_quant::{
    embed_one_body, embed_two_body, OneBodyOperator, SectorOperator, TwoBodyOperator,
};
use crate::subsystem::DensityMatrix;
use crate::tol;

/// H = Σ h_ij a†_i a_j + ½ Σ v_{ij;kl} a†_i a†_j a_k a_l with both parts
/// Hermitian.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    h1: OneBodyOperator,
    h2: TwoBodyOperator,
}

impl Hamiltonian {
    pub fn new(h1: OneBodyOperator, h2: TwoBodyOperator) -> Result<Self> {
        if h1.d() != h2.d() {
            return Err(Error::ModeCountMismatch {
                left: h1.d(),
                right: h2.d(),
            });
        }
        let dev = h1.hermiticity_deviation();
        if dev >= tol::HERMITICITY {
            return Err(Error::NotHermitian {
                what: "one-body Hamiltonian",
                deviation: dev,
            });
        }
        let dev = h2.hermiticity_deviation();
        if dev >= tol::HERMITICITY {
            return Err(Error::NotHermitian {
                what: "two-body Hamiltonian",
                deviation: dev,
            });
        }
        Ok(Hamiltonian { h1, h2 })
    }

    pub fn d(&self) -> usize {
        self.h1.d()
    }

    pub fn one_body(&self) -> &OneBodyOperator {
        &self.h1
    }

    pub fn two_body(&self) -> &TwoBodyOperator {
        &self.h2
    }

    /// Full sector matrix of H⁽¹⁾ + H⁽²⁾.
    pub fn sector_matrix(&self, basis: &Arc<SectorBasis>) -> Result<SectorOperator> {
        let m1 = embed_one_body(&self.h1, basis)?;
        let m2 = embed_two_body(&self.h2, basis)?;
        SectorOperator::new(basis.clone(), m1.matrix() + m2.matrix())
    }
}

/// Uniform output grid on [t0, t1]; `dt_out` is a target spacing, the
/// actual grid divides the interval evenly.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    dt_out: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt_out: f64) -> Result<Self> {
        if t1 < t0 || !t1.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidGrid {
                reason: format!("t1 = {t1} < t0 = {t0}"),
            });
        }
        if dt_out <= 0.0 || !dt_out.is_finite() {
            return Err(Error::InvalidGrid {
                reason: format!("dt_out = {dt_out} <= 0"),
            });
        }
        Ok(TimeGrid { t0, t1, dt_out })
    }

    pub fn from_zero(t1: f64, dt_out: f64) -> Result<Self> {
        Self::new(0.0, t1, dt_out)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn dt_out(&self) -> f64 {
        self.dt_out
    }

    pub fn times(&self) -> Vec<f64> {
        if self.t1 == self.t0 {
            return vec![self.t0];
        }
        let span = self.t1 - self.t0;
        let steps = (span / self.dt_out).round().max(1.0) as usize;
        (0..=steps)
            .map(|k| self.t0 + span * k as f64 / steps as f64)
            .collect()
    }
}

/// Snapshots of a density-matrix evolution at the output times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// ρ(t) = U(t-t0) ρ₀ U†(t-t0) with U = exp(-iHt) from the eigenbasis of
/// the sector Hamiltonian.
pub fn propagate_von_neumann(
    h: &Hamiltonian,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let basis = rho0.basis().clone();
    let hm = h.sector_matrix(&basis)?;
    let dev = hm.hermiticity_deviation();
    if dev >= tol::HERMITICITY {
        return Err(Error::NotHermitian {
            what: "sector Hamiltonian",
            deviation: dev,
        });
    }
    let (w, v) = linalg::hermitian_eigen(hm.matrix());
    let rho_eig = v.adjoint() * rho0.matrix() * &v;
    let times = grid.times();
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        let dt = t - grid.t0();
        let phases = CVector::from_iterator(w.len(), w.iter().map(|&e| (-I * e * dt).exp()));
        // U ρ U† in the eigenbasis is a phase sandwich
        let mut m = rho_eig.clone();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                m[(r, c)] *= phases[r] * phases[c].conj();
            }
        }
        let back = &v * m * v.adjoint();
        states.push(DensityMatrix::new_unchecked(basis.clone(), back));
    }
    Ok(Trajectory { times, states })
}

/// Fixed-step RK4 integration of ∂ρ/∂t = -i[H, ρ]; cross-validation for
/// the eigenbasis propagator and hook for time-dependent extensions.
pub fn propagate_von_neumann_rk4(
    h: &Hamiltonian,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    dt_max: f64,
) -> Result<Trajectory> {
    if dt_max <= 0.0 || !dt_max.is_finite() {
        return Err(Error::InvalidGrid {
            reason: format!("dt_max = {dt_max} <= 0"),
        });
    }
    let basis = rho0.basis().clone();
    let hm = h.sector_matrix(&basis)?.into_matrix();
    let rhs = |rho: &CMatrix| -> CMatrix { linalg::commutator(&hm, rho) * (-I) };
    let times = grid.times();
    let mut states = Vec::with_capacity(times.len());
    let mut cur = rho0.matrix().clone();
    states.push(DensityMatrix::new_unchecked(basis.clone(), cur.clone()));
    for pair in times.windows(2) {
        let span = pair[1] - pair[0];
        let nsub = (span / dt_max).ceil().max(1.0) as usize;
        let dt = span / nsub as f64;
        for _ in 0..nsub {
            cur = rk4_step(&rhs, &cur, dt);
        }
        states.push(DensityMatrix::new_unchecked(basis.clone(), cur.clone()));
    }
    Ok(Trajectory { times, states })
}

pub(crate) fn rk4_step(rhs: &dyn Fn(&CMatrix) -> CMatrix, y: &CMatrix, dt: f64) -> CMatrix {
    let half = 0.5 * dt;
    let k1 = rhs(y);
    let k2 = rhs(&(y + &k1 * C64::new(half, 0.0)));
    let k3 = rhs(&(y + &k2 * C64::new(half, 0.0)));
    let k4 = rhs(&(y + &k3 * C64::new(dt, 0.0)));
    y + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
}

/// The single-particle propagator u(t) = exp(-i h⁽¹⁾ t) as a d×d matrix.
pub fn single_particle_propagator(h1: &OneBodyOperator, t: f64) -> CMatrix {
    linalg::exp_hermitian_scaled(h1.coeffs(), -I * t)
}

fn frame_unitary(h1: &OneBodyOperator, basis: &Arc<SectorBasis>, t: f64) -> Result<CMatrix> {
    let h1m = embed_one_body(h1, basis)?;
    Ok(linalg::exp_hermitian_scaled(h1m.matrix(), -I * t))
}

/// X_I(t) = U₁†(t) X U₁(t) with U₁ = exp(-i H⁽¹⁾ t) embedded in the
/// sector; involutive with [`from_interaction_picture_op`].
pub fn to_interaction_picture_op(
    x: &SectorOperator,
    h1: &OneBodyOperator,
    t: f64,
) -> Result<SectorOperator> {
    let u = frame_unitary(h1, x.basis(), t)?;
    SectorOperator::new(x.basis().clone(), u.adjoint() * x.matrix() * &u)
}

pub fn from_interaction_picture_op(
    x: &SectorOperator,
    h1: &OneBodyOperator,
    t: f64,
) -> Result<SectorOperator> {
    let u = frame_unitary(h1, x.basis(), t)?;
    SectorOperator::new(x.basis().clone(), &u * x.matrix() * u.adjoint())
}

pub fn to_interaction_picture_rho(
    rho: &DensityMatrix,
    h1: &OneBodyOperator,
    t: f64,
) -> Result<DensityMatrix> {
    let u = frame_unitary(h1, rho.basis(), t)?;
    Ok(DensityMatrix::new_unchecked(
        rho.basis().clone(),
        u.adjoint() * rho.matrix() * &u,
    ))
}

pub fn from_interaction_picture_rho(
    rho: &DensityMatrix,
    h1: &OneBodyOperator,
    t: f64,
) -> Result<DensityMatrix> {
    let u = frame_unitary(h1, rho.basis(), t)?;
    Ok(DensityMatrix::new_unchecked(
        rho.basis().clone(),
        &u * rho.matrix() * u.adjoint(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{sector, FockState, SectorVector};
    use crate::linalg::max_abs;
    use crate::sample;
    use crate::second_quant::expectation_m_particle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rabi_hamiltonian(omega: f64) -> Hamiltonian {
        let mut h1 = CMatrix::zeros(2, 2);
        h1[(0, 1)] = C64::new(omega, 0.0);
        h1[(1, 0)] = C64::new(omega, 0.0);
        Hamiltonian::new(OneBodyOperator::new(h1), TwoBodyOperator::zero(2)).unwrap()
    }

    #[test]
    fn rabi_oscillation_populations() {
        let omega = 0.8;
        let h = rabi_hamiltonian(omega);
        let b = sector(2, 1).unwrap();
        let v = SectorVector::unit(b.clone(), &FockState::new(vec![1, 0])).unwrap();
        let rho0 = DensityMatrix::pure(&v).unwrap();
        let grid = TimeGrid::from_zero(3.0, 0.25).unwrap();
        let traj = propagate_von_neumann(&h, &rho0, &grid).unwrap();
        let i0 = b.index_of(&FockState::new(vec![1, 0])).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let p0 = rho.matrix()[(i0, i0)].re;
            let expect = (omega * t).cos().powi(2);
            assert!((p0 - expect).abs() < 1e-12, "t={t}: {p0} vs {expect}");
        }
    }

    #[test]
    fn commuting_initial_state_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = sector(3, 2).unwrap();
        let h =
            Hamiltonian::new(sample::one_body(&mut rng, 3), sample::two_body(&mut rng, 3)).unwrap();
        let hm = h.sector_matrix(&b).unwrap();
        // build rho diagonal in the energy eigenbasis
        let (_, v) = linalg::hermitian_eigen(hm.matrix());
        let dim = b.dim();
        let probs: Vec<f64> = (0..dim).map(|k| (k + 1) as f64).collect();
        let norm: f64 = probs.iter().sum();
        let diag = CMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                C64::new(probs[r] / norm, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let rho0 = DensityMatrix::new(b, &v * diag * v.adjoint()).unwrap();
        let grid = TimeGrid::from_zero(2.0, 0.5).unwrap();
        let traj = propagate_von_neumann(&h, &rho0, &grid).unwrap();
        for rho in &traj.states {
            assert!(max_abs(&(rho.matrix() - rho0.matrix())) < 1e-12);
        }
    }

    #[test]
    fn eigenbasis_and_rk4_propagation_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        // d=3, N=3 Hubbard chain
        let h = crate::hierarchy::hubbard_chain(3, 1.0, 0.7).unwrap();
        let b = sector(3, 3).unwrap();
        let rho0 = sample::density(&mut rng, &b);
        let grid = TimeGrid::from_zero(1.0, 0.5).unwrap();
        let exact = propagate_von_neumann(&h, &rho0, &grid).unwrap();
        let rk4 = propagate_von_neumann_rk4(&h, &rho0, &grid, 1e-3).unwrap();
        for (a, b_) in exact.states.iter().zip(&rk4.states) {
            assert!(max_abs(&(a.matrix() - b_.matrix())) < 1e-8);
        }
    }

    #[test]
    fn unitary_invariants_along_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h =
            Hamiltonian::new(sample::one_body(&mut rng, 3), sample::two_body(&mut rng, 3)).unwrap();
        let b = sector(3, 2).unwrap();
        let rho0 = sample::density(&mut rng, &b);
        let grid = TimeGrid::from_zero(4.0, 1.0).unwrap();
        let traj = propagate_von_neumann(&h, &rho0, &grid).unwrap();
        let hm = h.sector_matrix(&b).unwrap();
        let e0 = linalg::trace(&(rho0.matrix() * hm.matrix())).re;
        let p0 = rho0.purity();
        let number = embed_one_body(&OneBodyOperator::identity(3), &b).unwrap();
        for rho in &traj.states {
            assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
            assert!(rho
                .matrix()
                .adjoint()
                .iter()
                .zip(rho.matrix().iter())
                .all(|(a, b)| (a - b).norm() < 1e-10));
            assert!(rho.min_eigenvalue() > -1e-10);
            assert!((rho.purity() - p0).abs() < 1e-9);
            let e = linalg::trace(&(rho.matrix() * hm.matrix())).re;
            assert!((e - e0).abs() < 1e-9);
            let n = linalg::trace(&(rho.matrix() * number.matrix())).re;
            assert!((n - 2.0).abs() < 1e-10);
        }
        // expectation via the reduced route agrees with the sector route
        let last = traj.states.last().unwrap();
        let n_red = expectation_m_particle(
            last,
            &embed_one_body(&OneBodyOperator::identity(3), &sector(3, 1).unwrap()).unwrap(),
        )
        .unwrap();
        assert!((n_red.re - 2.0).abs() < 1e-10);
    }

    #[test]
    fn interaction_picture_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let h1 = sample::one_body(&mut rng, 3);
        let b = sector(3, 2).unwrap();
        let x = SectorOperator::new(b.clone(), sample::hermitian(&mut rng, b.dim())).unwrap();
        // t = 0 leaves operators unchanged
        let x0 = to_interaction_picture_op(&x, &h1, 0.0).unwrap();
        assert!(max_abs(&(x0.matrix() - x.matrix())) < 1e-13);
        // the embedded h1 commutes with its own propagator
        let h1m = embed_one_body(&h1, &b).unwrap();
        let rot = to_interaction_picture_op(&h1m, &h1, 1.3).unwrap();
        assert!(max_abs(&(rot.matrix() - h1m.matrix())) < 1e-11);
        // involution
        let fwd = to_interaction_picture_op(&x, &h1, 0.7).unwrap();
        let back = from_interaction_picture_op(&fwd, &h1, 0.7).unwrap();
        assert!(max_abs(&(back.matrix() - x.matrix())) < 1e-12);
        // spectrum preserved
        let before = linalg::eigenvalues_hermitian(x.matrix());
        let after = linalg::eigenvalues_hermitian(fwd.matrix());
        for (a, b_) in before.iter().zip(after.iter()) {
            assert!((a - b_).abs() < 1e-10);
        }
    }

    #[test]
    fn interaction_picture_satisfies_commutator_equation() {
        // d/dt ρ_I = -i[H²_I(t), ρ_I(t)] checked by central differences
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let h =
            Hamiltonian::new(sample::one_body(&mut rng, 3), sample::two_body(&mut rng, 3)).unwrap();
        let b = sector(3, 2).unwrap();
        let rho0 = sample::density(&mut rng, &b);
        let t = 0.6;
        let dt = 1e-5;
        let eval = |tt: f64| -> CMatrix {
            let g1 = TimeGrid::new(0.0, tt.max(dt * 0.5), tt.max(dt * 0.5)).unwrap();
            let traj = propagate_von_neumann(&h, &rho0, &g1).unwrap();
            let rho_t = traj.states.last().unwrap();
            to_interaction_picture_rho(rho_t, h.one_body(), tt)
                .unwrap()
                .matrix()
                .clone()
        };
        let plus = eval(t + dt);
        let minus = eval(t - dt);
        let deriv = (plus - minus) / C64::new(2.0 * dt, 0.0);
        // RHS at t
        let h2m = embed_two_body(h.two_body(), &b).unwrap();
        let h2i = to_interaction_picture_op(&h2m, h.one_body(), t).unwrap();
        let rho_i = {
            let g1 = TimeGrid::new(0.0, t, t).unwrap();
            let traj = propagate_von_neumann(&h, &rho0, &g1).unwrap();
            to_interaction_picture_rho(traj.states.last().unwrap(), h.one_body(), t).unwrap()
        };
        let rhs = linalg::commutator(h2i.matrix(), rho_i.matrix()) * (-I);
        let resid = max_abs(&(deriv - &rhs)) / max_abs(&rhs).max(1.0);
        assert!(resid < 1e-6, "residual {resid}");
    }
}
