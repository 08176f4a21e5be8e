//! Seeded sampling of operators and states, for tests and the self-check
//! suite. All functions are deterministic given the RNG state.

use rand::Rng;

use crate::fock::SectorBasis;
use crate::linalg::{CMatrix, CVector, C64};
use crate::second_quant::{OneBodyOperator, TwoBodyOperator};
use crate::subsystem::{DensityMatrix, ProductStateAmplitudes};
use std::sync::Arc;

pub fn complex<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex(rng))
}

/// A random Hermitian d×d matrix with entries of order one.
pub fn hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let x = matrix(rng, n, n);
    (&x + x.adjoint()) * C64::new(0.5, 0.0)
}

pub fn one_body<R: Rng>(rng: &mut R, d: usize) -> OneBodyOperator {
    OneBodyOperator::new(hermitian(rng, d))
}

/// A random Hermitian, exchange-symmetric two-body coefficient tensor.
pub fn two_body<R: Rng>(rng: &mut R, d: usize) -> TwoBodyOperator {
    let raw = matrix(rng, d * d, d * d);
    TwoBodyOperator::new(d, raw).hermitized()
}

/// A random full-rank density matrix on the given sector (X X† normalized).
pub fn density<R: Rng>(rng: &mut R, basis: &Arc<SectorBasis>) -> DensityMatrix {
    let dim = basis.dim();
    let x = matrix(rng, dim, dim);
    let mut rho = &x * x.adjoint();
    let tr: C64 = rho.diagonal().sum();
    rho /= tr;
    DensityMatrix::new(basis.clone(), rho).expect("sampled density is valid")
}

/// A random normalized single-particle amplitude vector.
pub fn product_amplitudes<R: Rng>(rng: &mut R, d: usize) -> ProductStateAmplitudes {
    let mut c = CVector::from_fn(d, |_, _| complex(rng));
    c /= C64::new(c.norm(), 0.0);
    ProductStateAmplitudes::new(c).expect("normalized by construction")
}

/// A random normalized pure-state vector of the given length.
pub fn pure_vector<R: Rng>(rng: &mut R, dim: usize) -> CVector {
    let mut v = CVector::from_fn(dim, |_, _| complex(rng));
    v /= C64::new(v.norm(), 0.0);
    v
}
