use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::run::FitResult;
use crate::fitness::DatasetError;

pub const RUN_DETAILS_FORMAT: &str = "apfit-run-details";

/// `name<TAB>value` per parameter in catalog order, three decimals.
pub fn export_parameters(result: &FitResult) -> String {
    let mut out = String::new();
    for (name, value) in result.best_params.named() {
        writeln!(out, "{name}\t{value:.3}").expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedHyper {
    pub phi1: f64,
    pub phi2: f64,
    pub chi: f64,
    pub gamma: f64,
    pub particles: usize,
    pub iterations: usize,
}

/// Everything needed to reproduce and audit a run. The `config` member is a
/// complete [`FitConfig`], so the document loads back as one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDetails {
    pub format: String,
    pub software_version: String,
    pub config: FitConfig,
    pub hyperparameters: ResolvedHyper,
    pub seed: u64,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub wall_time_s: f64,
    pub final_error: f64,
    pub iterations_completed: usize,
    pub cancelled: bool,
    pub best_parameters: Vec<NamedValue>,
    pub per_dataset: Vec<DatasetError>,
    pub history: Vec<f64>,
}

impl RunDetails {
    /// `config` should be the resolved config of the job that produced `result`.
    pub fn new(config: &FitConfig, result: &FitResult) -> Self {
        Self {
            format: RUN_DETAILS_FORMAT.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            hyperparameters: ResolvedHyper {
                phi1: result.hyper.phi1,
                phi2: result.hyper.phi2,
                chi: result.chi,
                gamma: result.hyper.gamma,
                particles: result.hyper.particles,
                iterations: result.hyper.iterations,
            },
            seed: result.seed,
            started_at: result.started_at,
            finished_at: result.finished_at,
            wall_time_s: result.wall_time_s,
            final_error: result.best_error,
            iterations_completed: result.iterations_completed(),
            cancelled: result.cancelled,
            best_parameters: result
                .best_params
                .named()
                .map(|(name, value)| NamedValue {
                    name: name.to_string(),
                    value,
                })
                .collect(),
            per_dataset: result.breakdown.per_dataset.clone(),
            history: result.history.clone(),
        }
    }
}

/// Pretty-printed JSON run-details document.
pub fn export_run_details(config: &FitConfig, result: &FitResult) -> String {
    let mut text = serde_json::to_string_pretty(&RunDetails::new(config, result))
        .expect("run details serialize");
    text.push('\n');
    text
}

/// Reads either a bare [`FitConfig`] or a run-details document.
pub fn load_config(text: &str) -> Result<FitConfig, serde_json::Error> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    if let Some(config) = value.get_mut("config") {
        return serde_json::from_value(config.take());
    }
    serde_json::from_value(value)
}

/// `dataset,cycle_length_ms,time_ms,model_u,data_u`; `data_u` is empty for
/// cycle lengths fitted to APDs only.
pub fn export_trace_csv(result: &FitResult) -> String {
    let mut out = String::from("dataset,cycle_length_ms,time_ms,model_u,data_u\n");
    for t in &result.traces {
        for (i, (time, m)) in t.time_ms.iter().zip(&t.model_u).enumerate() {
            let data = t
                .data_u
                .as_ref()
                .map(|d| d[i].to_string())
                .unwrap_or_default();
            writeln!(out, "{},{},{time},{m},{data}", t.label, t.cycle_length)
                .expect("writing to a String");
        }
    }
    out
}

/// `iteration,lowest_error` starting from the initial evaluation.
pub fn export_convergence_csv(result: &FitResult) -> String {
    let mut out = String::from("iteration,lowest_error\n");
    for (i, e) in result.history.iter().enumerate() {
        writeln!(out, "{i},{e}").expect("writing to a String");
    }
    out
}
