//! ADMM-family solvers with trajectory-following extrapolation.
//!
//! The crate is organised bottom-up:
//!
//! - [`prox`]: proximal operators and cached subproblem solves,
//! - [`splitting`]: one-step transitions of standard, relaxed and symmetric ADMM,
//! - [`extrapolate`]: difference windows, companion fits and extrapolation,
//! - [`a3dmm`]: run drivers with inertial or extrapolated acceleration,
//! - [`spectra`]: trajectory angles, principal angles and inertial spectra,
//! - [`problems`]: the problem gallery and data ingestion.

// `!(x < y)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod a3dmm;
pub mod extrapolate;
pub mod linear;
pub mod problems;
pub mod prox;
pub mod sparse;
pub mod spectra;
pub mod splitting;
pub mod trace;

pub use a3dmm::{
    run, run_a3dmm, run_inexact, run_variant, Acceleration, Depth, ExtrapConfig, InnerSolver, RunError, RunOutcome,
    RunSpec, Safeguard, WindowSource,
};
pub use linear::{GridShape, LinearMap};
pub use prox::ProxOracle;
pub use splitting::{IterateState, SolverConfig, SplitProblem, Subproblem, Variant};
pub use trace::{IterRecord, Reference, Trace, TraceSink};
