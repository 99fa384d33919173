//! Scenario files, sweeps, golden traces and output formats around
//! [`revmatch_core`].

pub mod artifacts;
pub mod desirable;
mod error;
pub mod golden;
pub mod scenario;
pub mod sweep;

pub use artifacts::{exit_code, render, run_report, run_scenario, write_files};
pub use error::{Error, Result};
pub use golden::{verify_golden, GoldenReport};
pub use scenario::{load_scenario, Scenario, ScenarioFile};
pub use sweep::{load_sweep, run_sweep, SweepSpec, SweepSummary};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "REVMATCH_OUT";
