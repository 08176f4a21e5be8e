//! The fixed-(d, N) bosonic sector: basis enumeration, the tuple calculus
//! of symmetrized states, and creation/annihilation string actions.
//!
//! Internally everything is expressed over unit-norm occupation-number
//! states |n₁ … n_d⟩ with Σ n_k = N (dimension C(N + d - 1, d - 1)).
//! Symmetrized tuple states |φ_{i₁} … φ_{i_N}⟩ = (N!)^(-1/2) a†_{i₁} ⋯
//! a†_{i_N}|0⟩ overcount that basis by N!/Π n_k! and are sub-normalized;
//! the conversion factor κ = √(Π n_k! / N!) is exposed so tuple-level
//! identities (permutation-invariant deltas, string-action lemmas) stay
//! directly testable. Combinatorial quantities are exact rationals; floats
//! enter only in amplitudes.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::tol;

/// C(n + d - 1, d - 1), the sector dimension, without building the
/// basis. Saturates at `u128::MAX` instead of overflowing; anything that
/// large is far past every cap anyway.
pub fn sector_dim(d: usize, n: usize) -> u128 {
    binomial_u128((n + d - 1) as u128, (d - 1) as u128)
}

fn binomial_u128(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(x) => x / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exact binomial coefficient as f64; exact for results below 2^53.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial_big(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// An ordered tuple of mode indices (i₁ … i_K), 0-based. The empty tuple
/// labels the vacuum.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeTuple(Vec<usize>);

impl ModeTuple {
    pub fn new(modes: Vec<usize>) -> Self {
        ModeTuple(modes)
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks every entry against the mode count `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&m| m >= d) {
            Some(&m) => Err(Error::ModeOutOfRange { mode: m, d }),
            None => Ok(()),
        }
    }

    /// Occupation multiplicities over `d` modes.
    pub fn occupations(&self, d: usize) -> Result<FockState> {
        self.validate(d)?;
        let mut occ = vec![0usize; d];
        for &m in &self.0 {
            occ[m] += 1;
        }
        Ok(FockState(occ))
    }
}

impl From<Vec<usize>> for ModeTuple {
    fn from(v: Vec<usize>) -> Self {
        ModeTuple(v)
    }
}

impl From<&[usize]> for ModeTuple {
    fn from(v: &[usize]) -> Self {
        ModeTuple(v.to_vec())
    }
}

/// A unit-norm occupation-number basis state |n₁ … n_d⟩.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockState(Vec<usize>);

impl FockState {
    pub fn new(occupations: Vec<usize>) -> Self {
        FockState(occupations)
    }

    pub fn occupations(&self) -> &[usize] {
        &self.0
    }

    pub fn num_modes(&self) -> usize {
        self.0.len()
    }

    /// Total particle number Σ n_k.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// The canonical (ascending) mode tuple realizing this state.
    pub fn to_tuple(&self) -> ModeTuple {
        let mut t = Vec::with_capacity(self.total());
        for (mode, &n) in self.0.iter().enumerate() {
            t.extend(std::iter::repeat_n(mode, n));
        }
        ModeTuple(t)
    }
}

/// The enumerated (d, N) sector with bidirectional index maps.
///
/// States are ordered reverse-lexicographically, e.g. for (d=2, N=2):
/// (2,0), (1,1), (0,2).
#[derive(Debug)]
pub struct SectorBasis {
    d: usize,
    n: usize,
    states: Vec<FockState>,
    index: HashMap<Vec<usize>, usize>,
}

impl SectorBasis {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        Self::with_cap(d, n, tol::DEFAULT_DIM_CAP)
    }

    pub fn with_cap(d: usize, n: usize, cap: usize) -> Result<Self> {
        assert!(d >= 1, "need at least one mode");
        let dim = sector_dim(d, n);
        if dim > cap as u128 {
            return Err(Error::DimensionOverflow { d, n, dim, cap });
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut occ = vec![0usize; d];
        enumerate_rev_lex(&mut occ, 0, n, &mut states);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.0.clone(), i))
            .collect();
        Ok(SectorBasis {
            d,
            n,
            states,
            index,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FockState {
        &self.states[i]
    }

    pub fn index_of(&self, f: &FockState) -> Option<usize> {
        self.index.get(&f.0).copied()
    }

    pub(crate) fn index_of_occ(&self, occ: &[usize]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn same_sector(&self, other: &SectorBasis) -> bool {
        self.d == other.d && self.n == other.n
    }

    pub(crate) fn check_same(&self, other: &SectorBasis) -> Result<()> {
        if self.same_sector(other) {
            Ok(())
        } else {
            Err(Error::SectorMismatch {
                d_left: self.d,
                n_left: self.n,
                d_right: other.d,
                n_right: other.n,
            })
        }
    }
}

fn enumerate_rev_lex(
    occ: &mut Vec<usize>,
    mode: usize,
    remaining: usize,
    out: &mut Vec<FockState>,
) {
    if mode == occ.len() - 1 {
        occ[mode] = remaining;
        out.push(FockState(occ.clone()));
        return;
    }
    for k in (0..=remaining).rev() {
        occ[mode] = k;
        enumerate_rev_lex(occ, mode + 1, remaining - k, out);
    }
    occ[mode] = 0;
}

/// Enumerates the (d, N) sector under the default dimension cap.
pub fn sector(d: usize, n: usize) -> Result<Arc<SectorBasis>> {
    SectorBasis::new(d, n).map(Arc::new)
}

pub fn sector_with_cap(d: usize, n: usize, cap: usize) -> Result<Arc<SectorBasis>> {
    SectorBasis::with_cap(d, n, cap).map(Arc::new)
}

/// A vector of amplitudes over a sector basis.
#[derive(Debug, Clone)]
pub struct SectorVector {
    basis: Arc<SectorBasis>,
    amplitudes: CVector,
}

impl SectorVector {
    pub fn new(basis: Arc<SectorBasis>, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::LengthMismatch {
                left: amplitudes.len(),
                right: basis.dim(),
            });
        }
        Ok(SectorVector { basis, amplitudes })
    }

    pub fn zero(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        SectorVector {
            basis,
            amplitudes: CVector::zeros(dim),
        }
    }

    /// The unit basis vector for one Fock state.
    pub fn unit(basis: Arc<SectorBasis>, state: &FockState) -> Result<Self> {
        let i = basis.index_of(state).ok_or_else(|| Error::SectorMismatch {
            d_left: basis.d(),
            n_left: basis.n(),
            d_right: state.num_modes(),
            n_right: state.total(),
        })?;
        let mut v = Self::zero(basis);
        v.amplitudes[i] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &SectorVector) -> Result<C64> {
        self.basis.check_same(&other.basis)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }
}

/// The permutation-invariant Kronecker delta
/// δ_{i₁…i_K; j₁…j_K} = (1/K!) Σ_σ Π_k δ_{i_k, j_σ(k)},
/// evaluated by the multiset multiplicity formula: (Π_m c_m!) / K! when the
/// tuples agree as multisets with multiplicities c_m, and 0 otherwise.
pub fn perm_delta(i: &ModeTuple, j: &ModeTuple) -> Result<BigRational> {
    if i.len() != j.len() {
        return Err(Error::LengthMismatch {
            left: i.len(),
            right: j.len(),
        });
    }
    let mut a = i.0.clone();
    let mut b = j.0.clone();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Ok(BigRational::zero());
    }
    let mut numer = BigInt::one();
    let mut run = 1usize;
    for k in 1..=a.len() {
        if k < a.len() && a[k] == a[k - 1] {
            run += 1;
        } else {
            numer *= factorial_big(run);
            run = 1;
        }
    }
    Ok(BigRational::new(numer, factorial_big(i.len())))
}

/// O(K!) permutation-sum evaluation of the same delta; the independent
/// oracle for [`perm_delta`]. Intended for K ≤ ~8.
pub fn perm_delta_permutation_sum(i: &ModeTuple, j: &ModeTuple) -> Result<BigRational> {
    if i.len() != j.len() {
        return Err(Error::LengthMismatch {
            left: i.len(),
            right: j.len(),
        });
    }
    let k = i.len();
    if k == 0 {
        return Ok(BigRational::one());
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut matches = BigInt::zero();
    let mut tally = |p: &[usize]| {
        if p.iter().enumerate().all(|(a, &b)| i.0[a] == j.0[b]) {
            matches += BigInt::one();
        }
    };
    // Heap's algorithm, iterating every permutation.
    tally(&perm);
    let mut c = vec![0usize; k];
    let mut idx = 0;
    while idx < k {
        if c[idx] < idx {
            if idx % 2 == 0 {
                perm.swap(0, idx);
            } else {
                perm.swap(c[idx], idx);
            }
            tally(&perm);
            c[idx] += 1;
            idx = 0;
        } else {
            c[idx] = 0;
            idx += 1;
        }
    }
    Ok(BigRational::new(matches, factorial_big(k)))
}

/// ⟨φ_{i₁…i_N}|φ_{j₁…j_N}⟩, the overlap of two symmetrized tuple states;
/// equals the permutation-invariant delta.
pub fn inner_product_symmetrized(i: &ModeTuple, j: &ModeTuple) -> Result<BigRational> {
    perm_delta(i, j)
}

/// κ² = Π_k n_k! / K! for the tuple's occupation multiplicities, exact.
pub fn kappa_sq(t: &ModeTuple) -> BigRational {
    let mut sorted = t.0.clone();
    sorted.sort_unstable();
    let mut numer = BigInt::one();
    let mut run = 1usize;
    for k in 1..=sorted.len() {
        if k < sorted.len() && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            numer *= factorial_big(run);
            run = 1;
        }
    }
    BigRational::new(numer, factorial_big(t.len()))
}

/// Converts a length-N tuple to its occupation state and the
/// sub-normalization κ ∈ (0, 1] with |φ_{i₁…i_N}⟩ = κ |n₁ … n_d⟩.
pub fn tuple_to_fock(t: &ModeTuple, d: usize) -> Result<(FockState, f64)> {
    let occ = t.occupations(d)?;
    let kappa = kappa_sq(t).to_f64().expect("kappa fits f64").sqrt();
    Ok((occ, kappa))
}

/// a_mode applied to a sector vector; lands in the (d, N-1) sector.
pub fn apply_annihilation(v: &SectorVector, mode: usize) -> Result<SectorVector> {
    let basis = v.basis();
    if mode >= basis.d() {
        return Err(Error::ModeOutOfRange { mode, d: basis.d() });
    }
    if basis.n() == 0 {
        return Err(Error::AnnihilateBelowVacuum { m: 1, n: 0 });
    }
    let target = sector(basis.d(), basis.n() - 1)?;
    let mut out = SectorVector::zero(target.clone());
    let mut occ = vec![0usize; basis.d()];
    for (i, f) in basis.states().iter().enumerate() {
        let amp = v.amplitudes[i];
        if amp == C64::new(0.0, 0.0) || f.occupations()[mode] == 0 {
            continue;
        }
        occ.copy_from_slice(f.occupations());
        let nk = occ[mode];
        occ[mode] -= 1;
        let j = target.index_of_occ(&occ).expect("target state enumerated");
        out.amplitudes[j] += amp * (nk as f64).sqrt();
    }
    Ok(out)
}

/// a†_mode applied to a sector vector; lands in the (d, N+1) sector.
pub fn apply_creation(v: &SectorVector, mode: usize) -> Result<SectorVector> {
    let basis = v.basis();
    if mode >= basis.d() {
        return Err(Error::ModeOutOfRange { mode, d: basis.d() });
    }
    let target = sector(basis.d(), basis.n() + 1)?;
    let mut out = SectorVector::zero(target.clone());
    let mut occ = vec![0usize; basis.d()];
    for (i, f) in basis.states().iter().enumerate() {
        let amp = v.amplitudes[i];
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        occ.copy_from_slice(f.occupations());
        occ[mode] += 1;
        let j = target.index_of_occ(&occ).expect("target state enumerated");
        out.amplitudes[j] += amp * (occ[mode] as f64).sqrt();
    }
    Ok(out)
}

/// The annihilation string a_{i₁} ⋯ a_{i_M} (rightmost acts first),
/// mapping (d, N) to (d, N-M).
pub fn apply_annihilation_string(modes: &ModeTuple, v: &SectorVector) -> Result<SectorVector> {
    let n = v.basis().n();
    if modes.len() > n {
        return Err(Error::AnnihilateBelowVacuum { m: modes.len(), n });
    }
    modes.validate(v.basis().d())?;
    let mut cur = v.clone();
    for &m in modes.0.iter().rev() {
        cur = apply_annihilation(&cur, m)?;
    }
    Ok(cur)
}

/// The creation string a†_{i₁} ⋯ a†_{i_M} (rightmost acts first),
/// mapping (d, N) to (d, N+M). Fails with a dimension overflow when the
/// target sector exceeds the cap.
pub fn apply_creation_string(modes: &ModeTuple, v: &SectorVector) -> Result<SectorVector> {
    modes.validate(v.basis().d())?;
    let mut cur = v.clone();
    for &m in modes.0.iter().rev() {
        cur = apply_creation(&cur, m)?;
    }
    Ok(cur)
}

/// Tuple-combinatorial realization of the annihilation-string action,
///
/// ```text
/// a_{i₁}…a_{i_M} |φ_{j₁…j_N}⟩
///   = √((N-M)!/N!) · M! · Σ_{α₁<…<α_M} δ_{i; j_α} |φ_{j ∖ j_α}⟩,
/// ```
///
/// evaluated by subset enumeration with permutation-invariant deltas.
/// Exponential in N — the cross-check route for the ladder-rule fold,
/// not a build path.
pub fn annihilation_string_tuple_formula(
    modes: &ModeTuple,
    j: &ModeTuple,
    d: usize,
) -> Result<SectorVector> {
    let n = j.len();
    let m = modes.len();
    if m > n {
        return Err(Error::AnnihilateBelowVacuum { m, n });
    }
    modes.validate(d)?;
    j.validate(d)?;
    let target = sector(d, n - m)?;
    let mut out = SectorVector::zero(target.clone());
    let pref = ((factorial_big(n - m).to_f64().unwrap() / factorial_big(n).to_f64().unwrap())
        .sqrt())
        * factorial_big(m).to_f64().unwrap();
    let mut positions = vec![0usize; m];
    // enumerate ordered position subsets α₁ < … < α_M
    fn rec(
        slot: usize,
        start: usize,
        m: usize,
        n: usize,
        positions: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if slot == m {
            f(positions);
            return;
        }
        for k in start..n {
            positions[slot] = k;
            rec(slot + 1, k + 1, m, n, positions, f);
        }
    }
    let mut apply = |pos: &[usize]| {
        let selected: Vec<usize> = pos.iter().map(|&p| j.modes()[p]).collect();
        let delta = perm_delta(modes, &ModeTuple::new(selected)).expect("equal lengths");
        if delta.is_zero() {
            return;
        }
        let rest: Vec<usize> = j
            .modes()
            .iter()
            .enumerate()
            .filter(|(idx, _)| !pos.contains(idx))
            .map(|(_, &mode)| mode)
            .collect();
        let rest_state = tuple_state(&ModeTuple::new(rest), &target).expect("rest in target");
        let w = C64::new(pref * delta.to_f64().expect("delta fits f64"), 0.0);
        for r in 0..out.amplitudes.len() {
            out.amplitudes[r] += rest_state.amplitudes()[r] * w;
        }
    };
    rec(0, 0, m, n, &mut positions, &mut apply);
    Ok(out)
}

/// The symmetrized tuple state |φ_{i₁…i_N}⟩ as a vector in its sector:
/// κ times the unit Fock state of the tuple's multiset.
pub fn tuple_state(t: &ModeTuple, basis: &Arc<SectorBasis>) -> Result<SectorVector> {
    if t.len() != basis.n() {
        return Err(Error::LengthMismatch {
            left: t.len(),
            right: basis.n(),
        });
    }
    let (f, kappa) = tuple_to_fock(t, basis.d())?;
    let mut v = SectorVector::zero(basis.clone());
    let i = basis.index_of(&f).expect("state in sector");
    v.amplitudes[i] = C64::new(kappa, 0.0);
    Ok(v)
}

/// Matrix of a_mode from (d, n) to (d, n-1), in basis order.
pub fn annihilation_matrix(
    basis: &Arc<SectorBasis>,
    mode: usize,
) -> Result<(Arc<SectorBasis>, CMatrix)> {
    if mode >= basis.d() {
        return Err(Error::ModeOutOfRange { mode, d: basis.d() });
    }
    if basis.n() == 0 {
        return Err(Error::AnnihilateBelowVacuum { m: 1, n: 0 });
    }
    let target = sector(basis.d(), basis.n() - 1)?;
    let mut m = CMatrix::zeros(target.dim(), basis.dim());
    let mut occ = vec![0usize; basis.d()];
    for (col, f) in basis.states().iter().enumerate() {
        let nk = f.occupations()[mode];
        if nk == 0 {
            continue;
        }
        occ.copy_from_slice(f.occupations());
        occ[mode] -= 1;
        let row = target.index_of_occ(&occ).expect("target state enumerated");
        m[(row, col)] = C64::new((nk as f64).sqrt(), 0.0);
    }
    Ok((target, m))
}

/// Matrix of a†_mode from (d, n) to (d, n+1), in basis order.
pub fn creation_matrix(
    basis: &Arc<SectorBasis>,
    mode: usize,
) -> Result<(Arc<SectorBasis>, CMatrix)> {
    let target = sector(basis.d(), basis.n() + 1)?;
    let (_, a) = annihilation_matrix(&target, mode)?;
    Ok((target, a.adjoint()))
}
