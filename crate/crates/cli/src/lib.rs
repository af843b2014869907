//! Experiment harness for the disparate-censorship library: declarative
//! sweep configs, parallel grid execution with per-job random-stream
//! isolation, CSV results, aggregate reports, and numerical verification
//! of the closed-form theory.

pub mod config;
pub mod report;
pub mod sweep;
pub mod verify;

pub use config::{ConfigFile, MethodSel};
pub use sweep::{run_sweep, ResultRow, SweepConfig, SweepSummary};
