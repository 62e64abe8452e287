//! Run configuration, analytic data, error norms and experiment drivers.

mod config;
mod data;
mod driver;
pub mod norms;

pub use config::{
    prism, prism_desk, standing_wave, BoundarySpec, DataConfig, KappaRegion, KappaSpec, MeshSpec, OutputConfig,
    ReferenceSpec, Region, RunConfig, Side, PRISM_TRIANGLE,
};
pub use data::{smoothstep, window_profile, DataSpec, Manufactured};
pub use driver::{
    compare_layers, compare_to_cn, comparison_table, compute_reference, convergence_table, converge,
    errors_against, method_name, prepare, run_experiment, solve, CnComparison, ConvergenceRow, ErrorReport,
    Experiment, Prepared, Reference, Solution, Sweep, Timings,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}
