//! Numerical tolerances used by validity checks and propagators.
//!
//! These are contract values: validity checks reject inputs beyond them
//! and tests assert against them, so they are constants rather than knobs.

/// Max |X - X†| entry for a matrix to count as Hermitian.
pub const HERMITICITY: f64 = 1e-12;

/// Allowed |Tr ρ - 1| for a density matrix.
pub const UNIT_TRACE: f64 = 1e-10;

/// Smallest admissible eigenvalue of a density matrix. Failures raise a
/// diagnostic rather than clipping the spectrum.
pub const PSD_MIN_EIGENVALUE: f64 = -1e-10;

/// Allowed deviation of a product-state amplitude vector from unit norm.
pub const AMPLITUDE_NORM: f64 = 1e-9;

/// Convergence target for the memory-integral quadrature (substep doubling
/// stops once successive estimates differ by less than this).
pub const QUADRATURE: f64 = 1e-8;

/// Convergence target for adaptive step halving of the nonlinear
/// propagators: successive trajectory refinements must agree to this.
pub const STEP_REFINEMENT: f64 = 1e-9;

/// Base step factor for the nonlinear integrators: dt <= factor / ||H_eff||.
pub const STEP_FACTOR: f64 = 0.05;

/// Consistency warning threshold for a hierarchy pair (ρ^(M), ρ^(M+1)):
/// the partial trace of ρ^(M+1) should match ρ^(M) this closely.
pub const HIERARCHY_CONSISTENCY: f64 = 1e-8;

/// Trace drift along a dissipative trajectory beyond which a warning is
/// logged.
pub const TRACE_DRIFT_WARN: f64 = 1e-6;

/// Default cap on sector dimension; dense matrices at this size are about
/// the limit of a desk machine.
pub const DEFAULT_DIM_CAP: usize = 20_000;
