//! Experiment harness for `splitaccel`: run configuration, solver
//! comparison, trace files and plots.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod harness;
pub mod plot;
pub mod trace_csv;

pub use config::{ConfigError, GammaRule, ProblemSpec, RawConfig, RunConfig, SolverSpec};
pub use harness::{run_experiment, ExperimentResult, SolverRun};
pub use plot::{emit_plot_svg, Quantity};
pub use trace_csv::{read_trace_csv, write_trace_csv, TRACE_HEADER};

/// Version string stamped into every trace.
pub const VERSION: &str = concat!("splitaccel-bench v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("problem setup: {0}")]
    Problem(#[from] splitaccel::problems::ProblemError),
    #[error("solver {solver}: {source}")]
    Run {
        solver: String,
        #[source]
        source: splitaccel::RunError,
    },
    #[error("no trace has any value for '{quantity}'")]
    EmptySelection { quantity: String },
}
