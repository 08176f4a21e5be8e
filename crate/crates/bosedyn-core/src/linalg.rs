//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// [A, B] = AB - BA.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// {A, B} = AB + BA.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().sum()
}

/// Largest entry magnitude, `||M||_max`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Max entry of |M - M†|; zero for exactly Hermitian matrices.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    max_abs(&(m - adj))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Returns `(w, v)` with `M = v diag(w) v†` and `v` unitary.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let w = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let v = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (w, v)
}

pub fn eigenvalues_hermitian(m: &CMatrix) -> DVector<f64> {
    let mut w = m.clone().symmetric_eigenvalues();
    w.as_mut_slice().sort_by(f64::total_cmp);
    w
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues_hermitian(m)[0]
}

/// exp(z H) for Hermitian H, via eigendecomposition.
pub fn exp_hermitian_scaled(h: &CMatrix, z: C64) -> CMatrix {
    let (w, v) = hermitian_eigen(h);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        w.len(),
        w.iter().map(|&x| (z * x).exp()),
    ));
    &v * d * v.adjoint()
}

/// ½ ||A - B||₁, the trace distance of two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let w = eigenvalues_hermitian(&(a - b));
    0.5 * w.iter().map(|x| x.abs()).sum::<f64>()
}

pub fn purity(rho: &CMatrix) -> f64 {
    trace(&(rho * rho)).re
}

/// Unitary DFT matrix; columns are plane-wave (momentum) modes
/// `⟨x|k⟩ = exp(2πi k x / d) / √d`.
pub fn dft_matrix(d: usize) -> CMatrix {
    let f = std::f64::consts::TAU / d as f64;
    CMatrix::from_fn(d, d, |x, k| {
        (I * f * (x as f64) * (k as f64)).exp() / (d as f64).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample() -> CMatrix {
        CMatrix::from_row_slice(
            3,
            3,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.2, -0.3),
                C64::new(0.0, 0.4),
                C64::new(0.2, 0.3),
                C64::new(-0.5, 0.0),
                C64::new(0.1, 0.0),
                C64::new(0.0, -0.4),
                C64::new(0.1, 0.0),
                C64::new(0.25, 0.0),
            ],
        )
    }

    #[test]
    fn eigen_reconstructs() {
        let h = sample();
        let (w, v) = hermitian_eigen(&h);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            3,
            w.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let rec = &v * d * v.adjoint();
        assert!(max_abs(&(rec - h)) < 1e-12);
        assert!(w[0] <= w[1] && w[1] <= w[2]);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let h = sample();
        let u = exp_hermitian_scaled(&h, C64::new(0.0, 0.0));
        assert!(max_abs(&(u - CMatrix::identity(3, 3))) < 1e-14);
    }

    #[test]
    fn exp_is_unitary_for_imaginary_argument() {
        let h = sample();
        let u = exp_hermitian_scaled(&h, -I * 0.7);
        assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn dft_is_unitary() {
        let f = dft_matrix(5);
        assert!(max_abs(&(f.adjoint() * &f - CMatrix::identity(5, 5))) < 1e-12);
    }

    #[test]
    fn trace_distance_of_equal_is_zero() {
        let h = sample();
        assert_abs_diff_eq!(trace_distance(&h, &h), 0.0, epsilon = 1e-14);
    }
}
