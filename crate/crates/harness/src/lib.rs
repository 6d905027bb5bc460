//! Experiment harness for `ftl-particles`: configuration, CSV/JSON formats
//! and the `run`, `converge`, `riemann` and `check` experiments used by the
//! `ftl` binary.

pub mod config;
pub mod experiments;
pub mod io;
pub mod json;

pub use config::{ExperimentConfig, Overrides};
