//! Harness library behind the `bosedyn` binary: scenario configuration,
//! engine orchestration, deterministic file output, and the self-check
//! suite.

pub mod acceptance;
pub mod config;
pub mod engines;
pub mod observables;
pub mod output;
