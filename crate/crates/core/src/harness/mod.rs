//! Configuration-driven experiments and the self-verification suite.
//!
//! An experiment sweeps the smoothing radius over a benchmark game, runs several
//! independent paths per radius and writes:
//!
//! * `trace.csv`: `eta,path,k,zo_samples,fo_samples,ll_samples,residual_sq`, one row per
//!   evaluated iterate;
//! * `table.csv`: `eta,threshold,iters,zo_samples,fo_samples,ll_samples`, the first
//!   evaluated iterate at which the path-averaged residual is at most the threshold;
//! * `metadata.json`: the resolved configuration and per-radius constants.

mod config;
mod experiment;
mod verify;

pub use config::{ExperimentConfig, GameName, LipschitzChoice, OutputChoice, SigmaChoice, SolverName};
pub use experiment::{
    fmt_float, run_experiment, EtaPlan, ExperimentOutput, FailedPath, RunOverrides, TableRow, TABLE_HEADER, TRACE_HEADER,
};
pub use verify::{verify_suite, CheckResult, VerifyOptions, VerifyReport};
