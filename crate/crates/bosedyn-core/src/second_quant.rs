//! Sector matrices of one- and two-body operators, and expectation values
//! of M-particle observables in an N-particle state.
//!
//! A one-body operator Σ_ij h_ij a†_i a_j and a two-body operator
//! ½ Σ_ijkl v_{ij;kl} a†_i a†_j a_k a_l are embedded into a fixed sector
//! by applying the elementary ladder rules state by state; each column
//! touches only O(d²) (resp. O(d⁴)) rows.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{binomial, ModeTuple, SectorBasis};
use crate::linalg::{self, CMatrix, C64};
use crate::subsystem::{partial_trace, DensityMatrix};
use crate::tol;

/// Coefficients h_ij of a single-particle operator Σ_ij h_ij a†_i a_j.
#[derive(Debug, Clone)]
pub struct OneBodyOperator {
    d: usize,
    coeffs: CMatrix,
}

impl OneBodyOperator {
    pub fn new(coeffs: CMatrix) -> Self {
        assert_eq!(
            coeffs.nrows(),
            coeffs.ncols(),
            "coefficient matrix must be square"
        );
        OneBodyOperator {
            d: coeffs.nrows(),
            coeffs,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(CMatrix::identity(d, d))
    }

    pub fn zero(d: usize) -> Self {
        Self::new(CMatrix::zeros(d, d))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.coeffs)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() < tol::HERMITICITY
    }

    /// Heisenberg rotation u† h u by a single-particle unitary.
    pub fn rotated(&self, u: &CMatrix) -> Self {
        Self::new(u.adjoint() * &self.coeffs * u)
    }
}

/// Coefficients v_{ij;kl} of a pairwise interaction
/// ½ Σ v_{ij;kl} a†_i a†_j a_k a_l, stored as a d²×d² matrix with row
/// index (i·d + j) and column index (k·d + l).
///
/// Construction canonically symmetrizes over (i↔j) and (k↔l); the ladder
/// contraction only sees that symmetric part, and with it the coefficients
/// coincide with the two-particle tuple matrix elements
/// ⟨φ_i φ_j|V|φ_k φ_l⟩.
#[derive(Debug, Clone)]
pub struct TwoBodyOperator {
    d: usize,
    coeffs: CMatrix,
}

impl TwoBodyOperator {
    pub fn new(d: usize, coeffs: CMatrix) -> Self {
        assert_eq!(coeffs.nrows(), d * d);
        assert_eq!(coeffs.ncols(), d * d);
        let mut sym = CMatrix::zeros(d * d, d * d);
        let quarter = C64::new(0.25, 0.0);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        sym[(i * d + j, k * d + l)] = quarter
                            * (coeffs[(i * d + j, k * d + l)]
                                + coeffs[(j * d + i, k * d + l)]
                                + coeffs[(i * d + j, l * d + k)]
                                + coeffs[(j * d + i, l * d + k)]);
                    }
                }
            }
        }
        TwoBodyOperator { d, coeffs: sym }
    }

    pub fn from_fn(d: usize, f: impl Fn(usize, usize, usize, usize) -> C64) -> Self {
        let coeffs = CMatrix::from_fn(d * d, d * d, |r, c| f(r / d, r % d, c / d, c % d));
        Self::new(d, coeffs)
    }

    pub fn zero(d: usize) -> Self {
        TwoBodyOperator {
            d,
            coeffs: CMatrix::zeros(d * d, d * d),
        }
    }

    /// On-site contact interaction: v_{xx;xx} = g, zero otherwise, i.e.
    /// (g/2) Σ_x a†_x a†_x a_x a_x = (g/2) Σ_x n_x(n_x - 1).
    pub fn contact(d: usize, g: f64) -> Self {
        let mut coeffs = CMatrix::zeros(d * d, d * d);
        for x in 0..d {
            coeffs[(x * d + x, x * d + x)] = C64::new(g, 0.0);
        }
        TwoBodyOperator { d, coeffs }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn element(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.coeffs[(i * self.d + j, k * self.d + l)]
    }

    /// The flattened d²×d² coefficient matrix.
    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    /// Max |v_{ij;kl} - conj(v_{lk;ji})|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.d;
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let delta = self.element(i, j, k, l) - self.element(l, k, j, i).conj();
                        dev = dev.max(delta.norm());
                    }
                }
            }
        }
        dev
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() < tol::HERMITICITY
    }

    /// Averages the tensor with its Hermitian conjugate.
    pub fn hermitized(&self) -> Self {
        let d = self.d;
        let coeffs = CMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, j, k, l) = (r / d, r % d, c / d, c % d);
            0.5 * (self.element(i, j, k, l) + self.element(l, k, j, i).conj())
        });
        TwoBodyOperator { d, coeffs }
    }

    /// Rotation by a single-particle unitary: (u ⊗ u)† v (u ⊗ u). Used for
    /// the interaction picture; preserves exchange symmetry and
    /// Hermiticity.
    pub fn rotated(&self, u: &CMatrix) -> Self {
        let uu = u.kronecker(u);
        TwoBodyOperator {
            d: self.d,
            coeffs: uu.adjoint() * &self.coeffs * uu,
        }
    }
}

/// A dense matrix over a sector basis.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    basis: Arc<SectorBasis>,
    matrix: CMatrix,
}

impl SectorOperator {
    pub fn new(basis: Arc<SectorBasis>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::LengthMismatch {
                left: matrix.nrows(),
                right: basis.dim(),
            });
        }
        Ok(SectorOperator { basis, matrix })
    }

    pub fn identity(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        SectorOperator {
            basis,
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn zero(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        SectorOperator {
            basis,
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }
}

/// Sector matrix of Σ_ij h_ij a†_i a_j; commutes with particle number by
/// construction, Hermitian whenever h is.
pub fn embed_one_body(h: &OneBodyOperator, basis: &Arc<SectorBasis>) -> Result<SectorOperator> {
    let d = basis.d();
    if h.d() != d {
        return Err(Error::ModeCountMismatch {
            left: h.d(),
            right: d,
        });
    }
    let dim = basis.dim();
    let mut m = CMatrix::zeros(dim, dim);
    let mut occ = vec![0usize; d];
    for (col, f) in basis.states().iter().enumerate() {
        for j in 0..d {
            let nj = f.occupations()[j];
            if nj == 0 {
                continue;
            }
            occ.copy_from_slice(f.occupations());
            occ[j] -= 1;
            for i in 0..d {
                let hij = h.coeffs()[(i, j)];
                if hij == C64::new(0.0, 0.0) {
                    continue;
                }
                occ[i] += 1;
                let amp = (nj as f64).sqrt() * (occ[i] as f64).sqrt();
                let row = basis.index_of_occ(&occ).expect("same sector");
                m[(row, col)] += hij * amp;
                occ[i] -= 1;
            }
        }
    }
    SectorOperator::new(basis.clone(), m)
}

/// Sector matrix of ½ Σ v_{ij;kl} a†_i a†_j a_k a_l. Vanishes identically
/// on sectors with fewer than two particles.
pub fn embed_two_body(v: &TwoBodyOperator, basis: &Arc<SectorBasis>) -> Result<SectorOperator> {
    let d = basis.d();
    if v.d() != d {
        return Err(Error::ModeCountMismatch {
            left: v.d(),
            right: d,
        });
    }
    let dev = v.hermiticity_deviation();
    if dev >= tol::HERMITICITY {
        return Err(Error::NotHermitian {
            what: "two-body tensor",
            deviation: dev,
        });
    }
    embed_two_body_unchecked(v, basis)
}

/// Same embedding without the Hermiticity gate. Needed for structural
/// probes like ρ ⊗ ρ of a non-state operator product.
pub fn embed_two_body_unchecked(
    v: &TwoBodyOperator,
    basis: &Arc<SectorBasis>,
) -> Result<SectorOperator> {
    let d = basis.d();
    if v.d() != d {
        return Err(Error::ModeCountMismatch {
            left: v.d(),
            right: d,
        });
    }
    let dim = basis.dim();
    let mut m = CMatrix::zeros(dim, dim);
    let half = C64::new(0.5, 0.0);
    let mut occ = vec![0usize; d];
    for (col, f) in basis.states().iter().enumerate() {
        for l in 0..d {
            let nl = f.occupations()[l];
            if nl == 0 {
                continue;
            }
            for k in 0..d {
                occ.copy_from_slice(f.occupations());
                occ[l] -= 1;
                let nk = occ[k];
                if nk == 0 {
                    continue;
                }
                occ[k] -= 1;
                let s12 = ((nl * nk) as f64).sqrt();
                for j in 0..d {
                    occ[j] += 1;
                    let s3 = (occ[j] as f64).sqrt();
                    for i in 0..d {
                        let vij = v.element(i, j, k, l);
                        if vij == C64::new(0.0, 0.0) {
                            continue;
                        }
                        occ[i] += 1;
                        let amp = s12 * s3 * (occ[i] as f64).sqrt();
                        let row = basis.index_of_occ(&occ).expect("same sector");
                        m[(row, col)] += half * vij * amp;
                        occ[i] -= 1;
                    }
                    occ[j] -= 1;
                }
            }
        }
    }
    SectorOperator::new(basis.clone(), m)
}

/// N-particle tuple matrix element ⟨φ_{i₁…i_N}|A^(M)|φ_{j₁…j_N}⟩ of an
/// M-particle operator with coefficient tensor `a`, by the
/// binomial-inverse double sum over ordered index subsets:
///
/// C(N,M)⁻¹ Σ_{α,β} A_{i_α;j_β} δ_{i∖i_α; j∖j_β}.
///
/// Exponential in N; this is a small-N oracle, never a build path.
pub fn m_particle_matrix_element(
    m: usize,
    a: &dyn Fn(&[usize], &[usize]) -> C64,
    i: &ModeTuple,
    j: &ModeTuple,
) -> Result<C64> {
    use num_traits::ToPrimitive;
    let n = i.len();
    if j.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: j.len(),
        });
    }
    if m > n {
        return Err(Error::InvalidSubsystem { m, n });
    }
    let subsets = combinations(n, m);
    let mut acc = C64::new(0.0, 0.0);
    for alpha in &subsets {
        let (i_sel, i_rest) = split(i.modes(), alpha);
        for beta in &subsets {
            let (j_sel, j_rest) = split(j.modes(), beta);
            let delta = crate::fock::perm_delta(&i_rest.clone().into(), &j_rest.clone().into())?;
            if num_traits::Zero::is_zero(&delta) {
                continue;
            }
            acc += a(&i_sel, &j_sel) * delta.to_f64().expect("delta fits f64");
        }
    }
    Ok(acc / binomial(n, m))
}

fn combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for k in start..n {
            cur.push(k);
            rec(k + 1, n, m, cur, out);
            cur.pop();
        }
    }
    rec(0, n, m, &mut cur, &mut out);
    out
}

fn split(modes: &[usize], positions: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut sel = Vec::with_capacity(positions.len());
    let mut rest = Vec::with_capacity(modes.len() - positions.len());
    let mut p = 0;
    for (idx, &mode) in modes.iter().enumerate() {
        if p < positions.len() && positions[p] == idx {
            sel.push(mode);
            p += 1;
        } else {
            rest.push(mode);
        }
    }
    (sel, rest)
}

/// Tr^(N){ρ^(N) A^(M)} = C(N,M) · Tr^(M){ρ^(M) A^(M)} for an M-particle
/// observable given as a sector operator over (d, M).
pub fn expectation_m_particle(rho_n: &DensityMatrix, a: &SectorOperator) -> Result<C64> {
    let n = rho_n.basis().n();
    let m = a.basis().n();
    if a.basis().d() != rho_n.basis().d() {
        return Err(Error::ModeCountMismatch {
            left: a.basis().d(),
            right: rho_n.basis().d(),
        });
    }
    if m > n {
        return Err(Error::InvalidSubsystem { m, n });
    }
    let rho_m = partial_trace(rho_n, m)?;
    Ok(linalg::trace(&(rho_m.matrix() * a.matrix())) * binomial(n, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::sector;
    use crate::linalg::max_abs;
    use crate::sample;
    use crate::subsystem::product_state_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Oracle: embed a one-body operator through explicit sparse ladder
    /// matrix products a†_i a_j.
    fn embed_one_body_ladder(
        h: &OneBodyOperator,
        basis: &std::sync::Arc<crate::fock::SectorBasis>,
    ) -> CMatrix {
        let d = basis.d();
        let mut acc = CMatrix::zeros(basis.dim(), basis.dim());
        for i in 0..d {
            for j in 0..d {
                if h.coeffs()[(i, j)] == C64::new(0.0, 0.0) {
                    continue;
                }
                let (down, aj) = crate::fock::annihilation_matrix(basis, j).unwrap();
                let (_, ci) = crate::fock::creation_matrix(&down, i).unwrap();
                acc += (ci * &aj) * h.coeffs()[(i, j)];
            }
        }
        acc
    }

    fn embed_two_body_ladder(
        v: &TwoBodyOperator,
        basis: &std::sync::Arc<crate::fock::SectorBasis>,
    ) -> CMatrix {
        let d = basis.d();
        let mut acc = CMatrix::zeros(basis.dim(), basis.dim());
        if basis.n() < 2 {
            return acc;
        }
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let coeff = v.element(i, j, k, l);
                        if coeff == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let (m1, al) = crate::fock::annihilation_matrix(basis, l).unwrap();
                        let (m2, ak) = crate::fock::annihilation_matrix(&m1, k).unwrap();
                        let (m3, cj) = crate::fock::creation_matrix(&m2, j).unwrap();
                        let (_, ci) = crate::fock::creation_matrix(&m3, i).unwrap();
                        acc += (ci * cj * ak * al) * (coeff * C64::new(0.5, 0.0));
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn identity_embeds_to_number_operator() {
        for (d, n) in [(2usize, 3usize), (3, 2), (4, 1)] {
            let b = sector(d, n).unwrap();
            let m = embed_one_body(&OneBodyOperator::identity(d), &b).unwrap();
            let expect = CMatrix::identity(b.dim(), b.dim()) * C64::new(n as f64, 0.0);
            assert!(max_abs(&(m.matrix() - expect)) < 1e-13);
        }
    }

    #[test]
    fn single_particle_sector_reproduces_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let h = sample::one_body(&mut rng, 2);
        let b = sector(2, 1).unwrap();
        let m = embed_one_body(&h, &b).unwrap();
        assert!(max_abs(&(m.matrix() - h.coeffs())) < 1e-14);
    }

    #[test]
    fn one_body_embedding_matches_ladder_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let h = sample::one_body(&mut rng, 3);
        let b = sector(3, 2).unwrap();
        let fast = embed_one_body(&h, &b).unwrap();
        let oracle = embed_one_body_ladder(&h, &b);
        assert!(max_abs(&(fast.matrix() - oracle)) < 1e-12);
        assert!(fast.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn two_body_vanishes_below_two_particles() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let v = sample::two_body(&mut rng, 3);
        for n in 0..2usize {
            let b = sector(3, n).unwrap();
            let m = embed_two_body(&v, &b).unwrap();
            assert!(max_abs(m.matrix()) < 1e-15, "n={n}");
        }
    }

    #[test]
    fn hubbard_contact_diagonal() {
        let u = 1.7;
        let v = TwoBodyOperator::contact(2, u);
        let b = sector(2, 2).unwrap();
        let m = embed_two_body(&v, &b).unwrap();
        // basis order (2,0), (1,1), (0,2): U n(n-1)/2 per site
        let expect = CMatrix::from_fn(3, 3, |r, c| {
            if r == c && r != 1 {
                C64::new(u, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        assert!(max_abs(&(m.matrix() - expect)) < 1e-13);
    }

    #[test]
    fn two_body_embedding_matches_ladder_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let v = sample::two_body(&mut rng, 3);
        let b = sector(3, 3).unwrap();
        let fast = embed_two_body(&v, &b).unwrap();
        let oracle = embed_two_body_ladder(&v, &b);
        assert!(max_abs(&(fast.matrix() - oracle)) < 1e-12);
        assert!(fast.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn embeddings_commute_with_number_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let b = sector(3, 3).unwrap();
        let nop = embed_one_body(&OneBodyOperator::identity(3), &b).unwrap();
        let h1 = embed_one_body(&sample::one_body(&mut rng, 3), &b).unwrap();
        let h2 = embed_two_body(&sample::two_body(&mut rng, 3), &b).unwrap();
        assert!(max_abs(&crate::linalg::commutator(h1.matrix(), nop.matrix())) < 1e-12);
        assert!(max_abs(&crate::linalg::commutator(h2.matrix(), nop.matrix())) < 1e-12);
    }

    #[test]
    fn embeddings_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let b = sector(3, 2).unwrap();
        let h_a = sample::one_body(&mut rng, 3);
        let h_b = sample::one_body(&mut rng, 3);
        let z = 0.75;
        let combo = OneBodyOperator::new(h_a.coeffs() * C64::new(z, 0.0) + h_b.coeffs());
        let lhs = embed_one_body(&combo, &b).unwrap();
        let rhs = embed_one_body(&h_a, &b).unwrap().into_matrix() * C64::new(z, 0.0)
            + embed_one_body(&h_b, &b).unwrap().into_matrix();
        assert!(max_abs(&(lhs.matrix() - rhs)) < 1e-12);

        let v_a = sample::two_body(&mut rng, 3);
        let v_b = sample::two_body(&mut rng, 3);
        let combo = TwoBodyOperator::new(3, v_a.coeffs() * C64::new(z, 0.0) + v_b.coeffs());
        let lhs = embed_two_body(&combo, &b).unwrap();
        let rhs = embed_two_body(&v_a, &b).unwrap().into_matrix() * C64::new(z, 0.0)
            + embed_two_body(&v_b, &b).unwrap().into_matrix();
        assert!(max_abs(&(lhs.matrix() - rhs)) < 1e-12);
    }

    #[test]
    fn non_hermitian_two_body_rejected_unless_hermitized() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let raw = TwoBodyOperator::new(3, sample::matrix(&mut rng, 9, 9));
        let b = sector(3, 2).unwrap();
        assert!(matches!(
            embed_two_body(&raw, &b).unwrap_err(),
            Error::NotHermitian { .. }
        ));
        assert!(embed_two_body(&raw.hermitized(), &b).is_ok());
    }

    #[test]
    fn m_particle_element_reduces_at_m_equals_n() {
        // M = N: single subset choice, element contracts directly
        let v: Vec<usize> = vec![0, 1];
        let i = crate::fock::ModeTuple::new(v.clone());
        let j = crate::fock::ModeTuple::new(vec![1, 0]);
        let a = |sel_i: &[usize], sel_j: &[usize]| -> C64 {
            // a rank-4 "table" symmetric in nothing particular
            C64::new(
                (sel_i[0] * 8 + sel_i[1] * 4 + sel_j[0] * 2 + sel_j[1] + 1) as f64,
                0.0,
            )
        };
        let got = m_particle_matrix_element(2, &a, &i, &j).unwrap();
        // direct Eq-(24) style sum with the empty-rest delta = 1
        assert!((got - a(&[0, 1], &[1, 0])).norm() < 1e-13);
    }

    #[test]
    fn m_particle_identity_gives_n_kappa_sq() {
        use num_traits::ToPrimitive;
        let id = |sel_i: &[usize], sel_j: &[usize]| -> C64 {
            if sel_i == sel_j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        };
        for tuple in [vec![0, 1], vec![1, 1], vec![0, 1, 1]] {
            let n = tuple.len();
            let t = crate::fock::ModeTuple::new(tuple);
            let got = m_particle_matrix_element(1, &id, &t, &t).unwrap();
            let kappa2 = crate::fock::kappa_sq(&t).to_f64().unwrap();
            let expect = n as f64 * kappa2;
            assert!((got - C64::new(expect, 0.0)).norm() < 1e-12, "{t:?}");
        }
    }

    #[test]
    fn m_particle_element_matches_embedded_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        let d = 3;
        let n = 3;
        let v = sample::two_body(&mut rng, d);
        let b = sector(d, n).unwrap();
        let emb = embed_two_body(&v, &b).unwrap();
        // coefficient-normalization note: the tensor entries are tuple elements of the
        // 2-particle operator, so the table is the symmetrized tensor itself
        let a = |si: &[usize], sj: &[usize]| v.element(si[0], si[1], sj[0], sj[1]);
        for fi in b.states().iter().take(4) {
            for fj in b.states().iter().take(4) {
                let ti = fi.to_tuple();
                let tj = fj.to_tuple();
                let (_, ki) = crate::fock::tuple_to_fock(&ti, d).unwrap();
                let (_, kj) = crate::fock::tuple_to_fock(&tj, d).unwrap();
                let tuple_elem = m_particle_matrix_element(2, &a, &ti, &tj).unwrap();
                let fock_elem = emb.matrix()[(b.index_of(fi).unwrap(), b.index_of(fj).unwrap())];
                assert!(
                    (tuple_elem - fock_elem * ki * kj).norm() < 1e-11,
                    "mismatch at {fi:?} {fj:?}"
                );
            }
        }
    }

    #[test]
    fn expectation_of_identity_counts_particles() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let b = sector(3, 3).unwrap();
        let rho = sample::density(&mut rng, &b);
        let b1 = sector(3, 1).unwrap();
        let a = embed_one_body(&OneBodyOperator::identity(3), &b1).unwrap();
        let got = expectation_m_particle(&rho, &a).unwrap();
        assert!((got - C64::new(3.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn occupation_expectation_on_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let d = 3;
        let n = 3;
        let c = sample::product_amplitudes(&mut rng, d);
        let b = sector(d, n).unwrap();
        let rho = product_state_density(&c, &b).unwrap();
        let b1 = sector(d, 1).unwrap();
        for k in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(k, k)] = C64::new(1.0, 0.0);
            let a = embed_one_body(&OneBodyOperator::new(unit), &b1).unwrap();
            let got = expectation_m_particle(&rho, &a).unwrap();
            let expect = n as f64 * c.amplitudes()[k].norm_sqr();
            assert!((got - C64::new(expect, 0.0)).norm() < 1e-11, "k={k}");
        }
    }

    #[test]
    fn expectation_agrees_with_sector_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let d = 3;
        let n = 3;
        let b = sector(d, n).unwrap();
        let rho = sample::density(&mut rng, &b);
        for m in 1..=2usize {
            let bm = sector(d, m).unwrap();
            let (a_small, a_big) = if m == 1 {
                let h = sample::one_body(&mut rng, d);
                (
                    embed_one_body(&h, &bm).unwrap(),
                    embed_one_body(&h, &b).unwrap(),
                )
            } else {
                let v = sample::two_body(&mut rng, d);
                (
                    embed_two_body(&v, &bm).unwrap(),
                    embed_two_body(&v, &b).unwrap(),
                )
            };
            let reduced_route = expectation_m_particle(&rho, &a_small).unwrap();
            let sector_route = crate::linalg::trace(&(rho.matrix() * a_big.matrix()));
            assert!(
                (reduced_route - sector_route).norm() < 1e-10,
                "m={m}: {reduced_route} vs {sector_route}"
            );
        }
    }

    #[test]
    fn trace_rule_vacuum_and_sector_forms() {
        // a-string a†-string |0⟩ = N! δ_perm |0⟩, and
        // Tr{a†_j-str a_i-str X} = N! κ_i κ_j ⟨F_i|X|F_j⟩
        use crate::fock::{
            apply_annihilation_string, apply_creation_string, perm_delta, tuple_state, ModeTuple,
            SectorVector,
        };
        use num_traits::ToPrimitive;
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let d = 3;
        for n in 1..=3usize {
            let b0 = sector(d, 0).unwrap();
            let bn = sector(d, n).unwrap();
            let x = sample::matrix(&mut rng, bn.dim(), bn.dim());
            let tuples: Vec<ModeTuple> = bn.states().iter().map(|f| f.to_tuple()).collect();
            for ti in &tuples {
                for tj in &tuples {
                    // vacuum identity
                    let vac =
                        SectorVector::unit(b0.clone(), &crate::fock::FockState::new(vec![0; d]))
                            .unwrap();
                    let up = apply_creation_string(tj, &vac).unwrap();
                    let down = apply_annihilation_string(ti, &up).unwrap();
                    let delta = perm_delta(ti, tj).unwrap().to_f64().unwrap();
                    let nfact = crate::fock::factorial_big(n).to_f64().unwrap();
                    assert!(
                        (down.amplitudes()[0] - C64::new(nfact * delta, 0.0)).norm() < 1e-10,
                        "vacuum trace rule at {ti:?},{tj:?}"
                    );
                    // sector trace rule: build a†_j-str a_i-str as a matrix
                    let mut op = CMatrix::zeros(bn.dim(), bn.dim());
                    for (col, f) in bn.states().iter().enumerate() {
                        let v = SectorVector::unit(bn.clone(), f).unwrap();
                        let lowered = apply_annihilation_string(ti, &v).unwrap();
                        let raised = apply_creation_string(tj, &lowered).unwrap();
                        for row in 0..bn.dim() {
                            op[(row, col)] = raised.amplitudes()[row];
                        }
                    }
                    let lhs = crate::linalg::trace(&(op * &x));
                    let vi = tuple_state(ti, &bn).unwrap();
                    let vj = tuple_state(tj, &bn).unwrap();
                    let rhs = (vi.amplitudes().adjoint() * &x * vj.amplitudes())[(0, 0)]
                        * C64::new(nfact, 0.0);
                    assert!(
                        (lhs - rhs).norm() < 1e-9,
                        "sector trace rule at {ti:?},{tj:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn product_state_vector_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let c = sample::product_amplitudes(&mut rng, 4);
        let b = sector(4, 3).unwrap();
        let v = crate::subsystem::product_state_vector(&c, &b).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
}
