//! Second-order interaction-picture machinery: B/A operators, the
//! state-dependent autocorrelation tensor Γ, its γ/S split and Lamb
//! shift, and the time-local dissipative nonlinear mean-field master
//! equation
//!
//! ```text
//! ∂ρ_I^(M)/∂t = -i [H_I⁽²⁾(t) + (N-M) C_I⁽¹⁾(t,t) + (N-M) H_LS(t), ρ]
//!             + (N-M) Σ γ_{ijkl}(t) ( a†_i a_j ρ a†_k a_l
//!                                   - ½ {a†_k a_l a†_i a_j, ρ} ),
//! ```
//!
//! with Γ_{ijkl}(t) = ∫₀ᵗ ds Tr{B_[ij](t-s) ρ_I⁽¹⁾(t) B_[kl](t)} playing
//! the role of bath autocorrelation functions — except that the "bath" is
//! the system itself, so Γ depends on the instantaneous state and the
//! equation is nonlinear. The Lindblad operators a†_i a_j conserve
//! particle number, so every piece of the generator is traceless;
//! positivity of the γ (Kossakowski) matrix is *not* guaranteed and is
//! reported as a diagnostic rather than asserted.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::exact::{Hamiltonian, TimeGrid};
use crate::fock::SectorBasis;
use crate::hierarchy::{mean_field_potential, mean_field_potential_interaction};
use crate::linalg::{self, CMatrix, C64, I};
use crate::second_quant::{
    embed_one_body, embed_two_body, OneBodyOperator, SectorOperator, TwoBodyOperator,
};
use crate::subsystem::{partial_trace_map, DensityMatrix};
use crate::tol;

/// Single-particle frame data for u(t) = exp(-i h⁽¹⁾ t), diagonalized
/// once and evaluated at many times.
#[derive(Debug, Clone)]
pub struct SingleParticleFrame {
    w: DVector<f64>,
    v: CMatrix,
}

impl SingleParticleFrame {
    pub fn new(h1: &OneBodyOperator) -> Self {
        let (w, v) = linalg::hermitian_eigen(h1.coeffs());
        SingleParticleFrame { w, v }
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        let d = self.w.len();
        let phases = CMatrix::from_fn(d, d, |r, c| {
            if r == c {
                (-I * self.w[r] * t).exp()
            } else {
                C64::new(0.0, 0.0)
            }
        });
        &self.v * phases * self.v.adjoint()
    }
}

/// H_I⁽²⁾(t) = U₁†(t) H⁽²⁾ U₁(t) at the coefficient level.
pub fn interaction_two_body(h2: &TwoBodyOperator, h1: &OneBodyOperator, t: f64) -> TwoBodyOperator {
    h2.rotated(&SingleParticleFrame::new(h1).unitary(t))
}

fn b_from_tensor(h2_i: &TwoBodyOperator, alpha: usize, beta: usize) -> CMatrix {
    let d = h2_i.d();
    CMatrix::from_fn(d, d, |i, j| h2_i.element(i, alpha, j, beta))
}

/// All d² operators B_[αβ] of a rotated tensor, indexed [α][β].
fn b_all(h2_i: &TwoBodyOperator) -> Vec<Vec<CMatrix>> {
    let d = h2_i.d();
    (0..d)
        .map(|a| (0..d).map(|b| b_from_tensor(h2_i, a, b)).collect())
        .collect()
}

/// B_[αβ](t) = Σ_ij H_I,iα;jβ(t) a†_i a_j as a single-particle operator.
/// Satisfies B_[αβ]† = B_[βα] (checked in debug builds).
pub fn b_operator(
    alpha: usize,
    beta: usize,
    t: f64,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
) -> Result<OneBodyOperator> {
    let d = h2.d();
    if alpha >= d || beta >= d {
        return Err(Error::ModeOutOfRange {
            mode: alpha.max(beta),
            d,
        });
    }
    let rotated = interaction_two_body(h2, h1, t);
    let m = b_from_tensor(&rotated, alpha, beta);
    debug_assert!(
        linalg::max_abs(&(m.adjoint() - b_from_tensor(&rotated, beta, alpha))) < 1e-10,
        "B adjoint pairing violated"
    );
    Ok(OneBodyOperator::new(m))
}

/// Max deviation of the trace identity Σ_α B_[αα](t) = Tr₁⁽²⁾ H_I⁽²⁾(t).
pub fn b_trace_identity_deviation(
    t: f64,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
) -> Result<f64> {
    let d = h2.d();
    let rotated = interaction_two_body(h2, h1, t);
    let mut sum = CMatrix::zeros(d, d);
    for a in 0..d {
        sum += b_from_tensor(&rotated, a, a);
    }
    let basis2 = crate::fock::sector(d, 2)?;
    let embedded = embed_two_body(&rotated, &basis2)?;
    let traced = partial_trace_map(&embedded, 1)?;
    Ok(linalg::max_abs(&(sum - traced.matrix())))
}

/// A_[αβ](s, ·) = Σ_k B_[αk](s) ρ_I,kβ⁽¹⁾; the state argument is the
/// (interaction-picture) single-particle matrix at the master equation's
/// own time.
pub fn a_operator(
    alpha: usize,
    beta: usize,
    s: f64,
    rho1_i: &CMatrix,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
) -> Result<OneBodyOperator> {
    let d = h2.d();
    if alpha >= d || beta >= d {
        return Err(Error::ModeOutOfRange {
            mode: alpha.max(beta),
            d,
        });
    }
    if rho1_i.nrows() != d || rho1_i.ncols() != d {
        return Err(Error::ModeCountMismatch {
            left: rho1_i.nrows(),
            right: d,
        });
    }
    let rotated = interaction_two_body(h2, h1, s);
    let mut m = CMatrix::zeros(d, d);
    for k in 0..d {
        m += b_from_tensor(&rotated, alpha, k) * rho1_i[(k, beta)];
    }
    Ok(OneBodyOperator::new(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendre,
}

/// Memory-integral quadrature control: `substeps` panels to start with,
/// doubled until successive estimates differ by less than `tol` (at most
/// `max_doublings` times). `fixed` disables refinement, which makes two
/// integrals node-identical and hence exactly comparable.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub substeps: usize,
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rule: QuadratureRule::Trapezoid,
            substeps: 16,
            tol: tol::QUADRATURE,
            max_doublings: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn fixed(rule: QuadratureRule, substeps: usize) -> Self {
        QuadratureSpec {
            rule,
            substeps,
            tol: f64::INFINITY,
            max_doublings: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps < 2 {
            return Err(Error::InvalidGrid {
                reason: format!("quadrature substeps {} < 2", self.substeps),
            });
        }
        Ok(())
    }
}

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

fn quad_once(f: &dyn Fn(f64) -> CMatrix, t: f64, rule: QuadratureRule, panels: usize) -> CMatrix {
    let h = t / panels as f64;
    match rule {
        QuadratureRule::Trapezoid => {
            let mut acc = (f(0.0) + f(t)) * C64::new(0.5, 0.0);
            for k in 1..panels {
                acc += f(h * k as f64);
            }
            acc * C64::new(h, 0.0)
        }
        QuadratureRule::GaussLegendre => {
            let mut acc: Option<CMatrix> = None;
            for k in 0..panels {
                let mid = h * (k as f64 + 0.5);
                for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                    let contrib = f(mid + 0.5 * h * x) * C64::new(0.5 * h * w, 0.0);
                    acc = Some(match acc {
                        None => contrib,
                        Some(a) => a + contrib,
                    });
                }
            }
            acc.expect("panels >= 1")
        }
    }
}

/// ∫₀ᵗ f(s) ds with substep doubling; returns the value and the last
/// refinement change (0 when refinement is disabled).
fn quad_integrate(
    f: &dyn Fn(f64) -> CMatrix,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<(CMatrix, f64)> {
    spec.validate()?;
    if t == 0.0 {
        let probe = f(0.0);
        return Ok((CMatrix::zeros(probe.nrows(), probe.ncols()), 0.0));
    }
    let mut panels = spec.substeps;
    let mut cur = quad_once(f, t, spec.rule, panels);
    if spec.max_doublings == 0 {
        return Ok((cur, 0.0));
    }
    let mut change = f64::INFINITY;
    for _ in 0..spec.max_doublings {
        panels *= 2;
        let next = quad_once(f, t, spec.rule, panels);
        change = linalg::max_abs(&(&next - &cur));
        cur = next;
        if change < spec.tol {
            return Ok((cur, change));
        }
    }
    Err(Error::QuadratureNonConvergence {
        estimate: change,
        refinements: spec.max_doublings,
    })
}

/// A rank-4 coefficient tensor over d modes, stored d²×d² with row
/// (i·d + j) and column (k·d + l).
#[derive(Debug, Clone)]
pub struct Rank4 {
    d: usize,
    entries: CMatrix,
}

impl Rank4 {
    pub fn new(d: usize, entries: CMatrix) -> Self {
        assert_eq!(entries.nrows(), d * d);
        assert_eq!(entries.ncols(), d * d);
        Rank4 { d, entries }
    }

    pub fn zero(d: usize) -> Self {
        Rank4 {
            d,
            entries: CMatrix::zeros(d * d, d * d),
        }
    }

    pub fn from_fn(d: usize, f: impl Fn(usize, usize, usize, usize) -> C64) -> Self {
        let entries = CMatrix::from_fn(d * d, d * d, |r, c| f(r / d, r % d, c / d, c % d));
        Rank4 { d, entries }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn element(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.entries[(i * self.d + j, k * self.d + l)]
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Max |T_{ijkl} - conj(T_{lkji})|, the conjugation-pairing deviation
    /// shared by γ and S.
    pub fn conjugation_symmetry_deviation(&self) -> f64 {
        let d = self.d;
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        dev = dev.max(
                            (self.element(i, j, k, l) - self.element(l, k, j, i).conj()).norm(),
                        );
                    }
                }
            }
        }
        dev
    }
}

/// The memory-integrated autocorrelation tensor Γ(t) together with its
/// quadrature error estimate.
#[derive(Debug, Clone)]
pub struct GammaTensor {
    pub tensor: Rank4,
    pub quad_error: f64,
}

/// Γ_{ijkl}(t) = ∫₀ᵗ ds Tr⁽¹⁾{B_[ij](t-s) ρ_I⁽¹⁾(t) B_[kl](t)}.
/// Γ(0) = 0 exactly.
pub fn gamma_tensor(
    t: f64,
    rho1_i: &CMatrix,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
    spec: &QuadratureSpec,
) -> Result<GammaTensor> {
    let d = h2.d();
    if rho1_i.nrows() != d || rho1_i.ncols() != d {
        return Err(Error::ModeCountMismatch {
            left: rho1_i.nrows(),
            right: d,
        });
    }
    let frame = SingleParticleFrame::new(h1);
    let bt = b_all(&h2.rotated(&frame.unitary(t)));
    let kernel = |s: f64| -> CMatrix {
        let bs = b_all(&h2.rotated(&frame.unitary(t - s)));
        let mut k = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let x = &bs[i][j] * rho1_i;
                for kk in 0..d {
                    for l in 0..d {
                        k[(i * d + j, kk * d + l)] = linalg::trace(&(&x * &bt[kk][l]));
                    }
                }
            }
        }
        k
    };
    let (entries, quad_error) = quad_integrate(&kernel, t, spec)?;
    Ok(GammaTensor {
        tensor: Rank4 { d, entries },
        quad_error,
    })
}

/// Splits Γ = γ/2 + iS into γ_{ijkl} = Γ_{ijkl} + Γ*_{lkji} and
/// S_{ijkl} = (Γ_{ijkl} - Γ*_{lkji}) / 2i; both halves carry the
/// conjugation symmetry X_{ijkl} = conj(X_{lkji}).
pub fn gamma_s_split(gamma: &GammaTensor) -> (Rank4, Rank4) {
    let d = gamma.tensor.d();
    let g = Rank4::from_fn(d, |i, j, k, l| {
        gamma.tensor.element(i, j, k, l) + gamma.tensor.element(l, k, j, i).conj()
    });
    let two_i = C64::new(0.0, 2.0);
    let s = Rank4::from_fn(d, |i, j, k, l| {
        (gamma.tensor.element(i, j, k, l) - gamma.tensor.element(l, k, j, i).conj()) / two_i
    });
    (g, s)
}

/// γ reshaped as the Hermitian "Kossakowski" rate matrix
/// K[(i,j),(l,k)] = γ_{ijkl} over the Lindblad operators a†_i a_j. Its
/// spectrum is reported, not asserted.
pub fn kossakowski_matrix(gamma: &Rank4) -> CMatrix {
    let d = gamma.d();
    CMatrix::from_fn(d * d, d * d, |r, c| {
        gamma.element(r / d, r % d, c % d, c / d)
    })
}

/// Embedded a†_i a_j for every index pair, indexed [i·d + j].
pub fn number_pair_operators(basis: &Arc<SectorBasis>) -> Result<Vec<CMatrix>> {
    let d = basis.d();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(i, j)] = C64::new(1.0, 0.0);
            out.push(embed_one_body(&OneBodyOperator::new(unit), basis)?.into_matrix());
        }
    }
    Ok(out)
}

/// H_LS = Σ S_{ijkl} a†_k a_l a†_i a_j on the target sector; Hermitian
/// whenever S carries the conjugation symmetry (checked).
pub fn lamb_shift(s: &Rank4, basis: &Arc<SectorBasis>) -> Result<SectorOperator> {
    let d = s.d();
    if basis.d() != d {
        return Err(Error::ModeCountMismatch {
            left: basis.d(),
            right: d,
        });
    }
    let dev = s.conjugation_symmetry_deviation();
    if dev > 1e-10 {
        return Err(Error::SymmetryViolation { deviation: dev });
    }
    let pairs = number_pair_operators(basis)?;
    let dim = basis.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for k in 0..d {
        for l in 0..d {
            let mut inner = CMatrix::zeros(dim, dim);
            for i in 0..d {
                for j in 0..d {
                    let coeff = s.element(i, j, k, l);
                    if coeff != C64::new(0.0, 0.0) {
                        inner += &pairs[i * d + j] * coeff;
                    }
                }
            }
            h += &pairs[k * d + l] * inner;
        }
    }
    SectorOperator::new(basis.clone(), h)
}

/// Σ γ_{ijkl} (a†_i a_j ρ a†_k a_l - ½{a†_k a_l a†_i a_j, ρ}); traceless
/// for any γ because the Lindblad operators conserve particle number.
pub fn dissipator_apply(gamma: &Rank4, rho: &CMatrix, basis: &Arc<SectorBasis>) -> Result<CMatrix> {
    let d = gamma.d();
    if basis.d() != d {
        return Err(Error::ModeCountMismatch {
            left: basis.d(),
            right: d,
        });
    }
    let pairs = number_pair_operators(basis)?;
    let dim = basis.dim();
    let mut out = CMatrix::zeros(dim, dim);
    let half = C64::new(0.5, 0.0);
    for i in 0..d {
        for j in 0..d {
            let nij = &pairs[i * d + j];
            let nij_rho = nij * rho;
            for k in 0..d {
                for l in 0..d {
                    let g = gamma.element(i, j, k, l);
                    if g == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let nkl = &pairs[k * d + l];
                    let sandwich = &nij_rho * nkl;
                    let klij = nkl * nij;
                    out += (sandwich - (&klij * rho + rho * &klij) * half) * g;
                }
            }
        }
    }
    Ok(out)
}

/// The assembled time-local master equation right-hand side (module
/// docs); `h2_i` and `c_i` are the time-t interaction-picture tensor and
/// mean-field potential, embedded here onto the sector of `rho_m`.
pub fn lindblad_rhs(
    rho_m: &DensityMatrix,
    gamma: &Rank4,
    h_ls: &SectorOperator,
    h2_i: &TwoBodyOperator,
    c_i: &OneBodyOperator,
    n: usize,
) -> Result<CMatrix> {
    let basis = rho_m.basis();
    let m = basis.n();
    if m > n {
        return Err(Error::InvalidSubsystem { m, n });
    }
    h_ls.basis().check_same(basis)?;
    let nm = C64::new((n - m) as f64, 0.0);
    let h2_emb = embed_two_body(h2_i, basis)?;
    let c_emb = embed_one_body(c_i, basis)?;
    let coherent = h2_emb.matrix() + (c_emb.matrix() + h_ls.matrix()) * nm;
    let mut out = linalg::commutator(&coherent, rho_m.matrix()) * (-I);
    out += dissipator_apply(gamma, rho_m.matrix(), basis)? * nm;
    Ok(out)
}

/// The same dissipative block evaluated through the pre-split form
/// ∫₀ᵗ ds Σ_{αβ} (A_[αβ](s,t) ρ B_[βα](t) - B_[βα](t) A_[αβ](s,t) ρ) + H.c.
/// — an independent route to the Lamb-shift + γ-Lindblad expression, used
/// to pin the algebra. Same quadrature rules apply; pass a `fixed` spec
/// to make it node-identical with [`gamma_tensor`].
pub fn dissipator_hc_form(
    t: f64,
    rho_m: &CMatrix,
    rho1_i: &CMatrix,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
    basis: &Arc<SectorBasis>,
    spec: &QuadratureSpec,
) -> Result<CMatrix> {
    let d = h2.d();
    if basis.d() != d {
        return Err(Error::ModeCountMismatch {
            left: basis.d(),
            right: d,
        });
    }
    let frame = SingleParticleFrame::new(h1);
    let bt = b_all(&h2.rotated(&frame.unitary(t)));
    let pairs = number_pair_operators(basis)?;
    let dim = basis.dim();
    let embed_one = |m: &CMatrix| -> CMatrix {
        let mut acc = CMatrix::zeros(dim, dim);
        for i in 0..d {
            for j in 0..d {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    acc += &pairs[i * d + j] * m[(i, j)];
                }
            }
        }
        acc
    };
    let bt_emb: Vec<Vec<CMatrix>> = bt
        .iter()
        .map(|row| row.iter().map(&embed_one).collect())
        .collect();
    let kernel = |s: f64| -> CMatrix {
        let bs = b_all(&h2.rotated(&frame.unitary(s)));
        let mut x = CMatrix::zeros(dim, dim);
        for alpha in 0..d {
            for beta in 0..d {
                let mut a = CMatrix::zeros(d, d);
                for k in 0..d {
                    a += &bs[alpha][k] * rho1_i[(k, beta)];
                }
                let a_emb = embed_one(&a);
                let b_emb = &bt_emb[beta][alpha];
                // (A ρ B - B A ρ) plus its Hermitian-conjugate partner
                // (B† ρ A† - ρ A† B†), kept as one linear superoperator so
                // the identity holds entrywise on non-Hermitian probes too
                x += &a_emb * rho_m * b_emb - b_emb * (&a_emb * rho_m);
                let a_dag = a_emb.adjoint();
                let b_dag = b_emb.adjoint();
                x += &b_dag * rho_m * &a_dag - rho_m * (&a_dag * &b_dag);
            }
        }
        x
    };
    let (out, _) = quad_integrate(&kernel, t, spec)?;
    Ok(out)
}

/// Per-snapshot health data of a dissipative trajectory.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub time: f64,
    pub trace: C64,
    pub purity: f64,
    pub rho_min_eigenvalue: f64,
    pub gamma_min_eigenvalue: f64,
    pub quad_error: f64,
}

/// Snapshots (Schrödinger picture) and diagnostics of a dissipative
/// mean-field propagation. States are raw matrices: the equation does not
/// guarantee they stay positive, and that is part of the data.
#[derive(Debug, Clone)]
pub struct DissipativeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Propagates the time-local equation for M = 1 with Γ recomputed from
/// the instantaneous ρ_I⁽¹⁾. The initial state must be (numerically)
/// pure — that is the ansatz behind the equation — but purity is *not*
/// enforced along the trajectory; its decay is reported as data.
pub fn propagate_dissipative_mean_field(
    rho1_0: &DensityMatrix,
    h: &Hamiltonian,
    n: usize,
    grid: &TimeGrid,
    spec: &QuadratureSpec,
) -> Result<DissipativeTrajectory> {
    let basis = rho1_0.basis().clone();
    if basis.n() != 1 {
        return Err(Error::InvalidSubsystem { m: basis.n(), n });
    }
    if basis.d() != h.d() {
        return Err(Error::ModeCountMismatch {
            left: basis.d(),
            right: h.d(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidSubsystem { m: 1, n });
    }
    if grid.t0() != 0.0 {
        return Err(Error::InvalidGrid {
            reason: "dissipative propagation is anchored at t0 = 0 (interaction picture)".into(),
        });
    }
    let purity_dev = (rho1_0.purity() - 1.0).abs();
    if purity_dev > tol::AMPLITUDE_NORM {
        return Err(Error::NotNormalized {
            deviation: purity_dev,
        });
    }
    spec.validate()?;
    let frame = SingleParticleFrame::new(h.one_body());
    let nm = C64::new((n - 1) as f64, 0.0);
    let rhs = |t: f64, rho_i: &CMatrix| -> Result<CMatrix> {
        let herm = (rho_i + rho_i.adjoint()) * C64::new(0.5, 0.0);
        let h2_i = h.two_body().rotated(&frame.unitary(t));
        let c_i = mean_field_potential(&herm, &h2_i)?;
        let gamma = gamma_tensor(t, &herm, h.two_body(), h.one_body(), spec)?;
        let (g, s) = gamma_s_split(&gamma);
        let h_ls = lamb_shift(&s, &basis)?;
        // M = 1: the embedded two-body part vanishes; C, Lamb shift and the
        // dissipator act directly on the d×d matrix.
        let coherent = (c_i.coeffs() + h_ls.matrix()) * nm;
        let mut out = linalg::commutator(&coherent, rho_i) * (-I);
        out += dissipator_apply(&g, rho_i, &basis)? * nm;
        Ok(out)
    };
    let times = grid.times();
    let span = grid.t1() - grid.t0();
    let run = |nsub: usize| -> Result<Vec<CMatrix>> {
        let mut cur = rho1_0.matrix().clone();
        let mut out = vec![cur.clone()];
        for pair in times.windows(2) {
            let dt = (pair[1] - pair[0]) / nsub as f64;
            for k in 0..nsub {
                let t = pair[0] + dt * k as f64;
                cur = rk4_step_time(&rhs, t, &cur, dt)?;
            }
            out.push(cur.clone());
        }
        Ok(out)
    };
    // initial step from the coherent generator scale; refined by doubling
    let c0 = mean_field_potential(rho1_0.matrix(), h.two_body())?;
    let scale = (n - 1) as f64
        * linalg::eigenvalues_hermitian(c0.coeffs())
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()))
        + 1e-9;
    let interval = if times.len() > 1 {
        span / (times.len() - 1) as f64
    } else {
        0.0
    };
    let mut nsub = if interval > 0.0 {
        (interval * scale / tol::STEP_FACTOR).ceil().max(1.0) as usize
    } else {
        1
    };
    let mut prev = run(nsub)?;
    if span > 0.0 {
        let mut converged = false;
        for _ in 0..10 {
            nsub *= 2;
            let next = run(nsub)?;
            let diff = prev
                .iter()
                .zip(&next)
                .map(|(a, b)| linalg::max_abs(&(a - b)))
                .fold(0.0, f64::max);
            prev = next;
            if diff < tol::STEP_REFINEMENT {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::StepRefinementFailed {
                reason: "dissipative trajectory did not converge under step halving".into(),
            });
        }
    }
    // diagnostics + transform back to the Schrödinger picture
    let mut states = Vec::with_capacity(times.len());
    let mut diagnostics = Vec::with_capacity(times.len());
    for (&t, rho_i) in times.iter().zip(&prev) {
        let herm = (rho_i + rho_i.adjoint()) * C64::new(0.5, 0.0);
        let gamma = gamma_tensor(t, &herm, h.two_body(), h.one_body(), spec)?;
        let (g, _) = gamma_s_split(&gamma);
        let trace = linalg::trace(rho_i);
        let drift = (trace - C64::new(1.0, 0.0)).norm();
        if drift > tol::TRACE_DRIFT_WARN {
            log::warn!("dissipative trajectory trace drift {drift:.3e} at t = {t}");
        }
        diagnostics.push(StepDiagnostics {
            time: t,
            trace,
            purity: linalg::purity(rho_i),
            rho_min_eigenvalue: linalg::min_eigenvalue(&herm),
            gamma_min_eigenvalue: linalg::min_eigenvalue(&kossakowski_matrix(&g)),
            quad_error: gamma.quad_error,
        });
        let u = frame.unitary(t);
        states.push(&u * rho_i * u.adjoint());
    }
    Ok(DissipativeTrajectory {
        times,
        states,
        diagnostics,
    })
}

fn rk4_step_time(
    rhs: &dyn Fn(f64, &CMatrix) -> Result<CMatrix>,
    t: f64,
    y: &CMatrix,
    dt: f64,
) -> Result<CMatrix> {
    let half = C64::new(0.5 * dt, 0.0);
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * dt, &(y + &k1 * half))?;
    let k3 = rhs(t + 0.5 * dt, &(y + &k2 * half))?;
    let k4 = rhs(t + dt, &(y + &k3 * C64::new(dt, 0.0)))?;
    Ok(y + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0))
}

/// The auxiliary operators of the full second-order expansion and their
/// Hermitian -i(X - X†) combinations.
#[derive(Debug, Clone)]
pub struct AuxOperators {
    /// D⁽¹⁾(t₁,t₂): Tr{B_[ij](t₁) Tr₁⁽²⁾{H_I⁽²⁾(t₂) ρ_I⁽²⁾(t₂)}} coefficients.
    pub d_matrix: CMatrix,
    /// E⁽¹⁾(t₁,t₂) = ½ C_I(t₂,t₂) ρ_I⁽¹⁾(t₂) C_I(t₁,t₂).
    pub e_matrix: CMatrix,
    /// S⁽²⁾(t₁,t₂) = ½ H_I⁽²⁾(t₁) ρ_I⁽²⁾(t₂) H_I⁽²⁾(t₂) on the two-particle sector.
    pub s_matrix: CMatrix,
    pub h_d: OneBodyOperator,
    pub h_e: OneBodyOperator,
    /// Two-particle Hermitian drift -i(S - S†) as a (d, 2) sector matrix.
    pub h_s: SectorOperator,
}

/// Builds D/E/S and H_D/H_E/H_S from the interaction-picture states
/// ρ_I⁽¹⁾(t₂) (d×d) and ρ_I⁽²⁾(t₂) (two-particle sector matrix).
pub fn aux_operators_dse(
    t1: f64,
    t2: f64,
    rho1_i: &CMatrix,
    rho2_i: &CMatrix,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
) -> Result<AuxOperators> {
    let d = h2.d();
    if rho1_i.nrows() != d || rho1_i.ncols() != d {
        return Err(Error::ModeCountMismatch {
            left: rho1_i.nrows(),
            right: d,
        });
    }
    let basis2 = crate::fock::sector(d, 2)?;
    if rho2_i.nrows() != basis2.dim() || rho2_i.ncols() != basis2.dim() {
        return Err(Error::SectorMismatch {
            d_left: d,
            n_left: 2,
            d_right: rho2_i.nrows(),
            n_right: rho2_i.ncols(),
        });
    }
    let frame = SingleParticleFrame::new(h1);
    let h2_t1 = h2.rotated(&frame.unitary(t1));
    let h2_t2 = h2.rotated(&frame.unitary(t2));
    let h2_t1_sec = embed_two_body(&h2_t1, &basis2)?;
    let h2_t2_sec = embed_two_body(&h2_t2, &basis2)?;
    // D: contract B(t1) against the one-particle reduction of H_I(t2) ρ_I⁽²⁾
    let product = SectorOperator::new(basis2.clone(), h2_t2_sec.matrix() * rho2_i)?;
    let reduced = partial_trace_map(&product, 1)?;
    let b_t1 = b_all(&h2_t1);
    let d_matrix = CMatrix::from_fn(d, d, |i, j| {
        linalg::trace(&(&b_t1[i][j] * reduced.matrix()))
    });
    // E: ½ C_I(t2,t2) ρ_I⁽¹⁾ C_I(t1,t2)
    let c_t2 = mean_field_potential_interaction(t2, rho1_i, h2, h1)?;
    let c_t1 = mean_field_potential_interaction(t1, rho1_i, h2, h1)?;
    let e_matrix = c_t2.coeffs() * rho1_i * c_t1.coeffs() * C64::new(0.5, 0.0);
    // S: ½ H_I(t1) ρ_I⁽²⁾ H_I(t2)
    let s_matrix = h2_t1_sec.matrix() * rho2_i * h2_t2_sec.matrix() * C64::new(0.5, 0.0);
    let minus_i = -I;
    let h_d = OneBodyOperator::new((&d_matrix - d_matrix.adjoint()) * minus_i);
    let h_e = OneBodyOperator::new((&e_matrix - e_matrix.adjoint()) * minus_i);
    let h_s = SectorOperator::new(basis2, (&s_matrix - s_matrix.adjoint()) * minus_i)?;
    Ok(AuxOperators {
        d_matrix,
        e_matrix,
        s_matrix,
        h_d,
        h_e,
        h_s,
    })
}

/// Whether hierarchy prefactors keep their exact (N-M-1), (N-M-2) form
/// or use the large-bath replacement by (N-M).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefactorMode {
    Exact,
    DiluteGas,
}

/// Interaction-picture history on quadrature nodes 0 = s₀ < … < s_K = t,
/// as needed by the memory-kernel evaluator: the M-particle state, the
/// single-particle state, and (only for the drift terms) the
/// two-particle state.
#[derive(Debug, Clone)]
pub struct SecondOrderHistory {
    pub times: Vec<f64>,
    pub rho_m: Vec<CMatrix>,
    pub rho_1: Vec<CMatrix>,
    pub rho_2: Option<Vec<CMatrix>>,
}

/// The ten structural terms of the full second-order memory-kernel
/// right-hand side at the history's final time, plus their sum. This is
/// an evaluator over supplied data; self-consistent propagation of the
/// memory kernel is out of scope.
#[derive(Debug, Clone)]
pub struct SecondOrderTerms {
    pub initial_commutator: CMatrix,
    pub memory_h2_h2: CMatrix,
    pub initial_mean_field: CMatrix,
    pub dissipative_ba: CMatrix,
    pub memory_h2_c: CMatrix,
    pub memory_c_h2: CMatrix,
    pub memory_c_c: CMatrix,
    pub drift_d: CMatrix,
    pub drift_s: CMatrix,
    pub drift_e: CMatrix,
    pub total: CMatrix,
}

pub fn second_order_rhs_terms(
    history: &SecondOrderHistory,
    basis_m: &Arc<SectorBasis>,
    h2: &TwoBodyOperator,
    h1: &OneBodyOperator,
    n: usize,
    mode: PrefactorMode,
) -> Result<SecondOrderTerms> {
    let m = basis_m.n();
    let d = basis_m.d();
    if h2.d() != d {
        return Err(Error::ModeCountMismatch {
            left: h2.d(),
            right: d,
        });
    }
    if m > n {
        return Err(Error::InvalidSubsystem { m, n });
    }
    let k = history.times.len();
    if k < 2 || history.rho_m.len() != k || history.rho_1.len() != k {
        return Err(Error::InvalidGrid {
            reason: "history needs >= 2 aligned nodes".into(),
        });
    }
    if history.times[0] != 0.0 {
        return Err(Error::InvalidGrid {
            reason: "history must start at s = 0".into(),
        });
    }
    let t = *history.times.last().unwrap();
    let nm = (n - m) as f64;
    let (p2, p3) = match mode {
        PrefactorMode::Exact => (nm - 1.0, nm - 2.0),
        PrefactorMode::DiluteGas => (nm, nm),
    };
    let frame = SingleParticleFrame::new(h1);
    let dim = basis_m.dim();
    let pairs = number_pair_operators(basis_m)?;
    let embed_one = |mat: &CMatrix| -> CMatrix {
        let mut acc = CMatrix::zeros(dim, dim);
        for i in 0..d {
            for j in 0..d {
                if mat[(i, j)] != C64::new(0.0, 0.0) {
                    acc += &pairs[i * d + j] * mat[(i, j)];
                }
            }
        }
        acc
    };
    let h2_i_emb = |tt: f64| -> Result<CMatrix> {
        Ok(embed_two_body(&h2.rotated(&frame.unitary(tt)), basis_m)?.into_matrix())
    };
    let c_emb = |t_h: f64, rho1: &CMatrix| -> Result<CMatrix> {
        Ok(embed_one(
            mean_field_potential_interaction(t_h, rho1, h2, h1)?.coeffs(),
        ))
    };
    // trapezoid over the supplied (possibly nonuniform) nodes
    let weights: Vec<f64> = (0..k)
        .map(|idx| {
            let left = if idx == 0 {
                history.times[0]
            } else {
                history.times[idx - 1]
            };
            let right = if idx + 1 == k {
                history.times[k - 1]
            } else {
                history.times[idx + 1]
            };
            0.5 * (right - left)
        })
        .collect();
    let h2_t = h2_i_emb(t)?;
    let comm = linalg::commutator;
    let zero = || CMatrix::zeros(dim, dim);

    let initial_commutator = comm(&h2_t, &history.rho_m[0]) * (-I);
    let initial_mean_field =
        comm(&c_emb(t, &history.rho_1[0])?, &history.rho_m[0]) * (-I) * C64::new(nm, 0.0);

    let mut memory_h2_h2 = zero();
    let mut dissipative_ba = zero();
    let mut memory_h2_c = zero();
    let mut memory_c_h2 = zero();
    let mut memory_c_c = zero();
    let mut drift_d = zero();
    let mut drift_s = zero();
    let mut drift_e = zero();
    for idx in 0..k {
        let s = history.times[idx];
        let w = C64::new(weights[idx], 0.0);
        let rho_m_s = &history.rho_m[idx];
        let rho_1_s = &history.rho_1[idx];
        let h2_s = h2_i_emb(s)?;
        let c_ss = c_emb(s, rho_1_s)?;
        let c_ts = {
            // C_I(t, s): tensor at t, state at s
            embed_one(mean_field_potential(rho_1_s, &h2.rotated(&frame.unitary(t)))?.coeffs())
        };
        memory_h2_h2 += comm(&h2_t, &comm(&h2_s, rho_m_s)) * w * C64::new(-1.0, 0.0);
        memory_h2_c += comm(&h2_t, &comm(&c_ss, rho_m_s)) * w * C64::new(-nm, 0.0);
        memory_c_h2 += comm(&c_ts, &comm(&h2_s, rho_m_s)) * w * C64::new(-nm, 0.0);
        memory_c_c += comm(&c_ts, &comm(&c_ss, rho_m_s)) * w * C64::new(-nm * p2, 0.0);
        // Σ_{αβ} [B_[βα](t), [A_[αβ](s,s), ρ(s)]]
        let bs = b_all(&h2.rotated(&frame.unitary(s)));
        let bt = b_all(&h2.rotated(&frame.unitary(t)));
        let mut ba = zero();
        for alpha in 0..d {
            for beta in 0..d {
                let mut a = CMatrix::zeros(d, d);
                for kk in 0..d {
                    a += &bs[alpha][kk] * rho_1_s[(kk, beta)];
                }
                let a_emb = embed_one(&a);
                let b_emb = embed_one(&bt[beta][alpha]);
                ba += comm(&b_emb, &comm(&a_emb, rho_m_s));
            }
        }
        dissipative_ba += ba * w * C64::new(-nm, 0.0);
        if nm * p2 != 0.0 {
            if let Some(r2) = &history.rho_2 {
                let aux = aux_operators_dse(t, s, rho_1_s, &r2[idx], h2, h1)?;
                drift_d +=
                    comm(&embed_one(aux.h_d.coeffs()), rho_m_s) * w * (-I) * C64::new(nm * p2, 0.0);
                let h_s_emb = if m >= 2 {
                    // S is a genuine two-particle operator: re-express its
                    // sector-2 matrix as a coefficient tensor and embed.
                    let tensor = two_particle_tensor_from_sector(aux.h_s.matrix(), d)?;
                    embed_two_body_unchecked_tensor(&tensor, basis_m)?
                } else {
                    zero()
                };
                drift_s += comm(&h_s_emb, rho_m_s) * w * (-I) * C64::new(nm * p2, 0.0);
                drift_e += comm(&embed_one(aux.h_e.coeffs()), rho_m_s)
                    * w
                    * (-I)
                    * C64::new(nm * p2 * p3, 0.0);
            } else {
                return Err(Error::InvalidGrid {
                    reason: "history lacks rho_2 but drift terms have nonzero prefactor".into(),
                });
            }
        }
    }
    let total = &initial_commutator
        + &memory_h2_h2
        + &initial_mean_field
        + &dissipative_ba
        + &memory_h2_c
        + &memory_c_h2
        + &memory_c_c
        + &drift_d
        + &drift_s
        + &drift_e;
    Ok(SecondOrderTerms {
        initial_commutator,
        memory_h2_h2,
        initial_mean_field,
        dissipative_ba,
        memory_h2_c,
        memory_c_h2,
        memory_c_c,
        drift_d,
        drift_s,
        drift_e,
        total,
    })
}

/// Recovers the coefficient tensor of a two-particle operator from its
/// (d, 2) sector matrix: v_{ij;kl} = ⟨F(i,j)|X|F(k,l)⟩ κ(ij) κ(kl) …
/// inverted through the tuple/Fock conversion.
fn two_particle_tensor_from_sector(x: &CMatrix, d: usize) -> Result<TwoBodyOperator> {
    use crate::fock::{tuple_to_fock, ModeTuple};
    let basis2 = crate::fock::sector(d, 2)?;
    let mut coeffs = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let (fi, ki) = tuple_to_fock(&ModeTuple::new(vec![i, j]), d)?;
            let row = basis2.index_of(&fi).expect("pair state");
            for k in 0..d {
                for l in 0..d {
                    let (fk, kk) = tuple_to_fock(&ModeTuple::new(vec![k, l]), d)?;
                    let col = basis2.index_of(&fk).expect("pair state");
                    coeffs[(i * d + j, k * d + l)] = x[(row, col)] * ki * kk;
                }
            }
        }
    }
    Ok(TwoBodyOperator::new(d, coeffs))
}

fn embed_two_body_unchecked_tensor(
    v: &TwoBodyOperator,
    basis: &Arc<SectorBasis>,
) -> Result<CMatrix> {
    Ok(crate::second_quant::embed_two_body_unchecked(v, basis)?.into_matrix())
}
