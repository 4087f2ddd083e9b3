//! Turns a [`FitConfig`] into a validated job, runs it and renders exports.

mod bench;
mod config;
mod export;
mod run;

pub use bench::{bench, BenchReport};
pub use config::{
    build_job, DatasetConfig, FieldError, FitConfig, FitJob, ParamSetting, ValidationErrors,
    DEFAULT_ALIGNMENT_MARGIN,
};
pub use export::{
    export_convergence_csv, export_parameters, export_run_details, export_trace_csv, load_config,
    NamedValue, ResolvedHyper, RunDetails, RUN_DETAILS_FORMAT,
};
pub use run::{run_fit, FitResult, FitTrace, Progress, RunControl, RunError};
