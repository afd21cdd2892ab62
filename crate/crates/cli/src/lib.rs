//! Experiment orchestration on top of `admission_core`: instance loading,
//! exact solves, policy simulations and comparisons, parameter sweeps, CSV
//! output with a schema validator, and replayable run manifests.

mod error;
pub mod experiment;
pub mod output;
pub mod sweep;

pub use error::{CliError, Result};
pub use experiment::{
    load_config, read_manifest, replay, resolve_instance, run_experiment, solve_exact,
    ExperimentSpec, Manifest, Run, SolverKind, ViSettings,
};
pub use output::{validate_csv, validate_dir, CsvKind};
pub use sweep::{run_sweep, write_sweep, SweepParam, SweepSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ADMISSION_OUT_DIR";
