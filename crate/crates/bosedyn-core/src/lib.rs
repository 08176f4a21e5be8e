//! Reduced dynamics of a subset of interacting bosons at fixed particle
//! number.
//!
//! The crate works in the number-conserving sector of `N` bosons on `d`
//! modes (dimension `C(N + d - 1, d - 1)`) and provides
//!
//! - [`fock`]: sector enumeration, the permutation-invariant Kronecker
//!   delta, and creation/annihilation string actions;
//! - [`second_quant`]: sector matrices of one- and two-body operators and
//!   expectation values of M-particle observables;
//! - [`subsystem`]: the bosonic partial trace, reduced density matrices,
//!   and pure product (condensate) states;
//! - [`exact`]: exact von Neumann propagation and interaction-picture
//!   transformations, used as the oracle for every approximate scheme;
//! - [`hierarchy`]: the BBGKY right-hand side, its pure-product truncation
//!   into the nonlinear mean-field Schrödinger equation, and the
//!   Gross-Pitaevskii specialization on a 1D lattice;
//! - [`dissipator`]: the second-order (interaction-picture) machinery —
//!   B/A operators, state-dependent autocorrelation tensor, Lamb shift,
//!   and the time-local dissipative mean-field master equation.
//!
//! ħ = 1 throughout; energies and times are reciprocal dimensionless
//! units. Mode indices are 0-based.

pub mod dissipator;
pub mod error;
pub mod exact;
pub mod fock;
pub mod hierarchy;
pub mod linalg;
pub mod sample;
pub mod second_quant;
pub mod subsystem;
pub mod tol;

pub use error::{Error, Result};
pub use exact::{Hamiltonian, TimeGrid, Trajectory};
pub use fock::{sector, FockState, ModeTuple, SectorBasis, SectorVector};
pub use hierarchy::{Boundary, LatticeConfig, MeanFieldState};
pub use linalg::{CMatrix, CVector, C64};
pub use second_quant::{OneBodyOperator, SectorOperator, TwoBodyOperator};
pub use subsystem::{DensityMatrix, ProductStateAmplitudes};
