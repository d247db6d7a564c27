//! Monte Carlo harness and file formats around the `tamed-euler` stepper.
//!
//! [`experiment`] measures strong errors of coarse runs against a fine
//! reference trajectory driven by the same noise, and fits convergence rates;
//! [`output`] renders the reports as CSV with a bit-exact format contract.

pub mod experiment;
pub mod output;

pub use experiment::{
    compare_untamed, fit_rate, path_noise, simulate_any, strong_error, sup_moments, ErrorReport,
    ErrorTime, ExperimentConfig, LevelError, MomentReport, MomentRow,
};
pub use output::{convergence_csv, moments_csv, trajectory_csv, write_out};
