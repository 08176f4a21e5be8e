//! The bosonic partial trace, reduced density matrices, and pure product
//! (condensate) states.
//!
//! The partial trace over N-M of N indistinguishable bosons maps a
//! (d, N) sector operator to a (d, M) one. In the occupation basis it is
//! an environment sum over the (d, N-M) sector,
//!
//! ```text
//! ρ^(M)[a,b] = Σ_env w(a,b,env) ρ^(N)[a+env, b+env],
//! w = Π_k √( C(a_k+e_k, e_k) C(b_k+e_k, e_k) ) / C(N, M),
//! ```
//!
//! which preserves the unit trace exactly (Vandermonde identity) and costs
//! O(dim_M² dim_{N-M}). The operator-string form of the same map is kept
//! in the test suite as an independent oracle.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{binomial, sector, SectorBasis, SectorVector};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::second_quant::{embed_two_body, SectorOperator, TwoBodyOperator};
use crate::tol;

/// A Hermitian, unit-trace, positive-semidefinite matrix over a sector.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    basis: Arc<SectorBasis>,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positive semidefiniteness
    /// against the crate tolerances.
    pub fn new(basis: Arc<SectorBasis>, matrix: CMatrix) -> Result<Self> {
        let rho = DensityMatrix { basis, matrix };
        rho.validate()?;
        Ok(rho)
    }

    /// Skips validation; for states valid by construction (e.g. unitary
    /// images of valid states).
    pub fn new_unchecked(basis: Arc<SectorBasis>, matrix: CMatrix) -> Self {
        DensityMatrix { basis, matrix }
    }

    /// Rank-1 projector |v⟩⟨v| of a normalized sector vector.
    pub fn pure(v: &SectorVector) -> Result<Self> {
        let dev = (v.norm() - 1.0).abs();
        if dev > tol::AMPLITUDE_NORM {
            return Err(Error::NotNormalized { deviation: dev });
        }
        let m = v.amplitudes() * v.amplitudes().adjoint();
        Ok(DensityMatrix {
            basis: v.basis().clone(),
            matrix: m,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrix.nrows() != self.basis.dim() || self.matrix.ncols() != self.basis.dim() {
            return Err(Error::LengthMismatch {
                left: self.matrix.nrows(),
                right: self.basis.dim(),
            });
        }
        let herm = linalg::hermiticity_deviation(&self.matrix);
        if herm >= tol::HERMITICITY {
            return Err(Error::NotHermitian {
                what: "density matrix",
                deviation: herm,
            });
        }
        let tr_dev = (linalg::trace(&self.matrix) - C64::new(1.0, 0.0)).norm();
        if tr_dev >= tol::UNIT_TRACE {
            return Err(Error::NotUnitTrace { deviation: tr_dev });
        }
        let min_eig = linalg::min_eigenvalue(&self.matrix);
        if min_eig <= tol::PSD_MIN_EIGENVALUE {
            return Err(Error::NotPositive {
                min_eigenvalue: min_eig,
            });
        }
        Ok(())
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        linalg::purity(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    pub fn as_operator(&self) -> SectorOperator {
        SectorOperator::new(self.basis.clone(), self.matrix.clone()).expect("dims match")
    }
}

/// The bosonic partial trace as a linear map on sector operators, without
/// density-matrix validity checks; trace-preserving.
pub fn partial_trace_map(x: &SectorOperator, m: usize) -> Result<SectorOperator> {
    let src = x.basis();
    let n = src.n();
    let d = src.d();
    if m > n {
        return Err(Error::InvalidSubsystem { m, n });
    }
    if m == n {
        return Ok(x.clone());
    }
    let out_basis = sector(d, m)?;
    let env_basis = sector(d, n - m)?;
    let c_nm = binomial(n, m);
    let dim = out_basis.dim();
    let mut out = CMatrix::zeros(dim, dim);
    let mut ea = vec![0usize; d];
    let mut eb = vec![0usize; d];
    for (a, fa) in out_basis.states().iter().enumerate() {
        for (b, fb) in out_basis.states().iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for env in env_basis.states() {
                let mut w2 = 1.0;
                for k in 0..d {
                    let ek = env.occupations()[k];
                    ea[k] = fa.occupations()[k] + ek;
                    eb[k] = fb.occupations()[k] + ek;
                    w2 *= binomial(ea[k], ek) * binomial(eb[k], ek);
                }
                let row = src
                    .index_of_occ(&ea)
                    .expect("summed state in source sector");
                let col = src
                    .index_of_occ(&eb)
                    .expect("summed state in source sector");
                acc += x.matrix()[(row, col)] * (w2.sqrt() / c_nm);
            }
            out[(a, b)] = acc;
        }
    }
    SectorOperator::new(out_basis, out)
}

/// The M-particle reduced density matrix of an N-particle state,
/// ρ^(M) = Tr_{N-M} ρ^(N); unit trace, Hermitian, PSD.
pub fn partial_trace(rho: &DensityMatrix, m: usize) -> Result<DensityMatrix> {
    let reduced = partial_trace_map(&rho.as_operator(), m)?;
    let basis = reduced.basis().clone();
    DensityMatrix::new(basis, reduced.into_matrix())
}

/// Projection of an N-particle operator onto the M-particle subspace:
/// 𝕀^(M) X 𝕀^(M) = C(N, M) · Tr_{N-M} X.
pub fn project_to_sector(x: &SectorOperator, m: usize) -> Result<SectorOperator> {
    let n = x.basis().n();
    let traced = partial_trace_map(x, m)?;
    let basis = traced.basis().clone();
    let scaled = traced.into_matrix() * C64::new(binomial(n, m), 0.0);
    SectorOperator::new(basis, scaled)
}

/// Normalized single-particle amplitudes c_i = ⟨φ_i|Φ⟩ defining a pure
/// product state.
#[derive(Debug, Clone)]
pub struct ProductStateAmplitudes {
    c: CVector,
}

impl ProductStateAmplitudes {
    pub fn new(c: CVector) -> Result<Self> {
        let dev = (c.norm() - 1.0).abs();
        if dev > tol::AMPLITUDE_NORM {
            return Err(Error::NotNormalized { deviation: dev });
        }
        Ok(ProductStateAmplitudes { c })
    }

    pub fn d(&self) -> usize {
        self.c.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.c
    }
}

/// The N-fold condensate vector (a†_Φ)^N|0⟩/√N! in the occupation basis:
/// amplitude √(N!/Π n_k!) Π c_k^{n_k} on |n₁…n_d⟩.
pub fn product_state_vector(
    c: &ProductStateAmplitudes,
    basis: &Arc<SectorBasis>,
) -> Result<SectorVector> {
    if c.d() != basis.d() {
        return Err(Error::ModeCountMismatch {
            left: c.d(),
            right: basis.d(),
        });
    }
    let n = basis.n();
    let mut amps = CVector::zeros(basis.dim());
    for (idx, f) in basis.states().iter().enumerate() {
        // multinomial N!/Π n_k! as a product of binomials
        let mut w2 = 1.0;
        let mut rem = n;
        let mut amp = C64::new(1.0, 0.0);
        for (k, &nk) in f.occupations().iter().enumerate() {
            w2 *= binomial(rem, nk);
            rem -= nk;
            amp *= c.amplitudes()[k].powu(nk as u32);
        }
        amps[idx] = amp * w2.sqrt();
    }
    SectorVector::new(basis.clone(), amps)
}

/// The bosonic pure product state, a rank-1 projector onto the N-fold
/// condensate vector; its partial traces are product states of the same
/// amplitudes.
pub fn product_state_density(
    c: &ProductStateAmplitudes,
    basis: &Arc<SectorBasis>,
) -> Result<DensityMatrix> {
    let v = product_state_vector(c, basis)?;
    DensityMatrix::pure(&v)
}

/// Feeds the (non-bosonic) operator ρ⊗ρ through the two-particle tuple
/// calculus and traces one particle out, yielding
/// ½(ρ Tr ρ + ρ²) — *not* a unit-trace state unless ρ is pure, which is
/// the point of the check.
pub fn naive_tensor_trace_check(rho1: &DensityMatrix) -> Result<SectorOperator> {
    let basis1 = rho1.basis();
    if basis1.n() != 1 {
        return Err(Error::InvalidSubsystem {
            m: 1,
            n: basis1.n(),
        });
    }
    let d = basis1.d();
    let r = rho1.matrix();
    let tensor = TwoBodyOperator::from_fn(d, |i, j, k, l| r[(i, k)] * r[(j, l)]);
    let basis2 = sector(d, 2)?;
    let embedded = embed_two_body(&tensor, &basis2)?;
    partial_trace_map(&embedded, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockState;
    use crate::linalg::max_abs;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn condensate_in_one_mode_traces_to_projector() {
        let c = ProductStateAmplitudes::new(CVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ]))
        .unwrap();
        let b2 = sector(2, 2).unwrap();
        let rho = product_state_density(&c, &b2).unwrap();
        let r1 = partial_trace(&rho, 1).unwrap();
        let mut expect = CMatrix::zeros(2, 2);
        expect[(0, 0)] = C64::new(1.0, 0.0);
        assert!(max_abs(&(r1.matrix() - expect)) < 1e-14);
    }

    #[test]
    fn balanced_fock_state_traces_to_maximally_mixed() {
        let b = sector(2, 2).unwrap();
        let v = SectorVector::unit(b, &FockState::new(vec![1, 1])).unwrap();
        let rho = DensityMatrix::pure(&v).unwrap();
        let r1 = partial_trace(&rho, 1).unwrap();
        let expect = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(max_abs(&(r1.matrix() - expect)) < 1e-14);
    }

    #[test]
    fn nesting_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = sector(3, 3).unwrap();
        let rho = sample::density(&mut rng, &b);
        let direct = partial_trace(&rho, 1).unwrap();
        let nested = partial_trace(&partial_trace(&rho, 2).unwrap(), 1).unwrap();
        assert!(max_abs(&(direct.matrix() - nested.matrix())) < 1e-12);
    }

    #[test]
    fn edge_subsystem_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = sector(2, 2).unwrap();
        let rho = sample::density(&mut rng, &b);
        // M = N returns the input unchanged
        let same = partial_trace(&rho, 2).unwrap();
        assert!(max_abs(&(same.matrix() - rho.matrix())) < 1e-15);
        // M = 0 returns the scalar trace
        let scalar = partial_trace(&rho, 0).unwrap();
        assert_eq!(scalar.matrix().nrows(), 1);
        assert!((scalar.matrix()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        // M > N rejected
        assert!(matches!(
            partial_trace(&rho, 3).unwrap_err(),
            Error::InvalidSubsystem { m: 3, n: 2 }
        ));
    }

    #[test]
    fn projection_scales_by_binomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = sector(3, 3).unwrap();
        let rho = sample::density(&mut rng, &b);
        let proj = project_to_sector(&rho.as_operator(), 2).unwrap();
        let traced = partial_trace(&rho, 2).unwrap();
        let expect = traced.matrix() * C64::new(3.0, 0.0); // C(3,2)
        assert!(max_abs(&(proj.matrix() - expect)) < 1e-12);
    }

    #[test]
    fn identity_projects_to_valid_state() {
        let b = sector(3, 2).unwrap();
        let dim = b.dim();
        let uniform = CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        let rho = DensityMatrix::new(b, uniform).unwrap();
        let r1 = partial_trace(&rho, 1).unwrap();
        assert!((r1.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(r1.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn product_state_amplitude_example() {
        // c = (1/√2, 1/√2), N = 2 → amplitudes (1/2, 1/√2, 1/2)
        let s = 1.0 / 2f64.sqrt();
        let c = ProductStateAmplitudes::new(CVector::from_vec(vec![
            C64::new(s, 0.0),
            C64::new(s, 0.0),
        ]))
        .unwrap();
        let b = sector(2, 2).unwrap();
        let v = product_state_vector(&c, &b).unwrap();
        let expect = [0.5, s, 0.5];
        for (i, &e) in expect.iter().enumerate() {
            assert!((v.amplitudes()[i] - C64::new(e, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn product_state_closure_under_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let c = sample::product_amplitudes(&mut rng, 3);
        let b3 = sector(3, 3).unwrap();
        let rho3 = product_state_density(&c, &b3).unwrap();
        for m in 1..=2usize {
            let traced = partial_trace(&rho3, m).unwrap();
            let bm = sector(3, m).unwrap();
            let direct = product_state_density(&c, &bm).unwrap();
            assert!(
                max_abs(&(traced.matrix() - direct.matrix())) < 1e-13,
                "m={m}"
            );
            assert!((traced.purity() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn naive_tensor_trace_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for d in 2..=3usize {
            let b1 = sector(d, 1).unwrap();
            let rho = sample::density(&mut rng, &b1);
            let out = naive_tensor_trace_check(&rho).unwrap();
            let r = rho.matrix();
            let expect = (r + r * r) * C64::new(0.5, 0.0);
            assert!(max_abs(&(out.matrix() - &expect)) < 1e-12);
        }
    }

    #[test]
    fn naive_tensor_trace_fixed_point_at_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let b1 = sector(3, 1).unwrap();
        let v = SectorVector::new(b1.clone(), sample::pure_vector(&mut rng, 3)).unwrap();
        let rho = DensityMatrix::pure(&v).unwrap();
        let out = naive_tensor_trace_check(&rho).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-13);
    }

    #[test]
    fn maximally_mixed_loses_trace() {
        // ½(½𝕀 + ¼𝕀) = (3/8)𝕀, trace 3/4
        let b1 = sector(2, 1).unwrap();
        let rho = DensityMatrix::new(b1, CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).unwrap();
        let out = naive_tensor_trace_check(&rho).unwrap();
        let expect = CMatrix::identity(2, 2) * C64::new(0.375, 0.0);
        assert!(max_abs(&(out.matrix() - expect)) < 1e-14);
        assert!((linalg::trace(out.matrix()).re - 0.75).abs() < 1e-14);
    }

    #[test]
    fn partial_trace_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = sector(3, 2).unwrap();
        let x = sample::matrix(&mut rng, b.dim(), b.dim());
        let y = sample::matrix(&mut rng, b.dim(), b.dim());
        let a = C64::new(0.3, -1.1);
        let xs = SectorOperator::new(b.clone(), x.clone()).unwrap();
        let ys = SectorOperator::new(b.clone(), y.clone()).unwrap();
        let combo = SectorOperator::new(b.clone(), &x * a + &y).unwrap();
        let lhs = partial_trace_map(&combo, 1).unwrap();
        let rhs = partial_trace_map(&xs, 1).unwrap().into_matrix() * a
            + partial_trace_map(&ys, 1).unwrap().into_matrix();
        assert!(max_abs(&(lhs.matrix() - rhs)) < 1e-12);
    }

    #[test]
    fn rejects_invalid_density_inputs() {
        let b = sector(2, 1).unwrap();
        let mut m = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.2); // not Hermitian
        assert!(matches!(
            DensityMatrix::new(b.clone(), m).unwrap_err(),
            Error::NotHermitian { .. }
        ));
        let m = CMatrix::identity(2, 2); // trace 2
        assert!(matches!(
            DensityMatrix::new(b.clone(), m).unwrap_err(),
            Error::NotUnitTrace { .. }
        ));
        let mut m = CMatrix::zeros(2, 2); // eigenvalues (1.5, -0.5)
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(
            DensityMatrix::new(b, m).unwrap_err(),
            Error::NotPositive { .. }
        ));
    }
}
