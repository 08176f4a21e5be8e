//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Returned when a requested sector exceeds the configured dimension
    /// cap (desk-scale limit).
    #[error("sector (d={d}, n={n}) has dimension {dim}, exceeding the cap {cap}")]
    DimensionOverflow {
        d: usize,
        n: usize,
        dim: u128,
        cap: usize,
    },

    /// Returned when two mode tuples that must have equal length do not.
    #[error("tuple length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Returned when a mode index lies outside `0..d`.
    #[error("mode index {mode} out of range for {d} modes")]
    ModeOutOfRange { mode: usize, d: usize },

    /// Returned when an annihilation string is longer than the particle
    /// number of the sector it acts on.
    #[error("cannot annihilate {m} particles from an {n}-particle sector")]
    AnnihilateBelowVacuum { m: usize, n: usize },

    /// Returned when operators or states built over different mode counts
    /// are combined.
    #[error("mode count mismatch: {left} vs {right}")]
    ModeCountMismatch { left: usize, right: usize },

    /// Returned when operators or states over different sectors are
    /// combined.
    #[error("sector mismatch: (d={d_left}, n={n_left}) vs (d={d_right}, n={n_right})")]
    SectorMismatch {
        d_left: usize,
        n_left: usize,
        d_right: usize,
        n_right: usize,
    },

    /// Returned when a subsystem size is invalid for the given sector.
    #[error("invalid subsystem size m={m} for an n={n} sector")]
    InvalidSubsystem { m: usize, n: usize },

    /// Returned when a Hermiticity check fails.
    #[error("{what} not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { what: &'static str, deviation: f64 },

    /// Returned when a density matrix trace deviates from one.
    #[error("density matrix trace deviates from 1 by {deviation:.3e}")]
    NotUnitTrace { deviation: f64 },

    /// Returned when a density matrix has an eigenvalue below the PSD
    /// tolerance.
    #[error("density matrix not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    /// Returned when a state vector norm deviates from one beyond
    /// tolerance.
    #[error("state not normalized (norm deviates from 1 by {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    /// Returned when a rank-4 tensor violates its required conjugation
    /// symmetry.
    #[error("tensor violates conjugation symmetry (max deviation {deviation:.3e})")]
    SymmetryViolation { deviation: f64 },

    /// Returned when a time grid is empty or inverted.
    #[error("invalid time grid: {reason}")]
    InvalidGrid { reason: String },

    /// Returned when the memory-integral quadrature fails to converge.
    #[error("quadrature did not converge (error estimate {estimate:.3e} after {refinements} refinements)")]
    QuadratureNonConvergence { estimate: f64, refinements: usize },

    /// Returned when adaptive step refinement bottoms out without meeting
    /// its tolerance.
    #[error("integrator step refinement failed: {reason}")]
    StepRefinementFailed { reason: String },

    /// Returned when propagation drifts beyond a hard tolerance.
    #[error("propagation drift: {reason}")]
    PropagationDrift { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
