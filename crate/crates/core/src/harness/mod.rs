//! Simulation harness: seeded streams, error metrics, baseline estimators,
//! configuration and the Monte Carlo sweep.

pub mod baselines;
pub mod config;
pub mod metrics;
pub mod rng;
pub mod sweep;

pub use baselines::{ls_baseline, polar_omp, OmpConfig, OmpOutput};
pub use config::{draw_paths, Algorithm, Derived, ExplicitPath, SimConfig};
pub use metrics::{nmse, parameter_errors, to_db};
pub use rng::{stream, Stream};
pub use sweep::{
    draw_trial, estimate, monte_carlo_sweep, observe_trial, run_trial, write_csv, Estimate,
    RunRecord, Trial, CSV_HEADER,
};
