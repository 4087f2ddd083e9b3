use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataio::{normalize, ApdDataset, Dataset, VoltageDataset};
use crate::fitness::FitProblem;
use crate::model::{model_spec, Bounds, ModelId, ModelOptions};
use crate::pso::PsoHyper;
use crate::simulator::Protocol;
use crate::stimulus::StimulusConfig;

pub const DEFAULT_ALIGNMENT_MARGIN: usize = 50;

fn default_true() -> bool {
    true
}

fn default_weight() -> f64 {
    1.0
}

fn default_margin() -> usize {
    DEFAULT_ALIGNMENT_MARGIN
}

/// One row of the parameter table. Missing bounds fall back to the model
/// catalog; `value` is required for parameters that are not fitted unless
/// the catalog pins them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSetting {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default = "default_true")]
    pub fit: bool,
}

/// A dataset as supplied by the user, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Voltage {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        samples: Vec<f64>,
        cycle_length: f64,
        #[serde(default = "default_weight")]
        weight: f64,
    },
    Apd {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        targets: Vec<f64>,
        cycle_length: f64,
        threshold: f64,
        #[serde(default = "default_weight")]
        weight: f64,
    },
}

impl DatasetConfig {
    pub fn cycle_length(&self) -> f64 {
        match self {
            DatasetConfig::Voltage { cycle_length, .. }
            | DatasetConfig::Apd { cycle_length, .. } => *cycle_length,
        }
    }

    fn label_or(&self, index: usize) -> String {
        let (label, kind) = match self {
            DatasetConfig::Voltage { label, .. } => (label, "voltage"),
            DatasetConfig::Apd { label, .. } => (label, "apd"),
        };
        label
            .clone()
            .unwrap_or_else(|| format!("{kind}{index}@{}", self.cycle_length()))
    }
}

/// Complete description of a fit. Serializes to the `config` section of the
/// run-details document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: ModelId,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamSetting>,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub stimulus: StimulusConfig,
    #[serde(default)]
    pub protocol: Protocol,
    /// Model default when absent; 0 disables normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_to: Option<f64>,
    #[serde(default)]
    pub hyper: PsoHyper,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_margin")]
    pub alignment_margin: usize,
    #[serde(default)]
    pub model_options: ModelOptions,
}

impl FitConfig {
    pub fn new(model: ModelId) -> Self {
        Self {
            model,
            parameters: BTreeMap::new(),
            datasets: Vec::new(),
            stimulus: StimulusConfig::default(),
            protocol: Protocol::default(),
            normalize_to: None,
            hyper: PsoHyper::default(),
            seed: 0,
            alignment_margin: DEFAULT_ALIGNMENT_MARGIN,
            model_options: ModelOptions::default(),
        }
    }

    pub fn setting_mut(&mut self, name: &str) -> &mut ParamSetting {
        self.parameters
            .entry(name.to_string())
            .or_insert_with(|| ParamSetting {
                fit: true,
                ..ParamSetting::default()
            })
    }

    /// Pins `name` to `value` and excludes it from the fit.
    pub fn fix(&mut self, name: &str, value: f64) {
        let s = self.setting_mut(name);
        s.value = Some(value);
        s.fit = false;
    }

    pub fn set_bounds(&mut self, name: &str, min: f64, max: f64) {
        let s = self.setting_mut(name);
        s.min = Some(min);
        s.max = Some(max);
    }
}

/// A validation failure tied to the config field that caused it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationErrors(pub Vec<FieldError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

#[derive(Default)]
struct Collector(Vec<FieldError>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldError {
            path: path.into(),
            message: message.into(),
        });
    }
}

/// A validated fit, ready to run.
#[derive(Debug, Clone)]
pub struct FitJob {
    config: FitConfig,
    bounds: Bounds,
    problem: FitProblem,
}

impl FitJob {
    /// The config with every parameter row and `normalize_to` filled in.
    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// Search box over the full parameter vector; fixed parameters have
    /// `min == max`.
    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn problem(&self) -> &FitProblem {
        &self.problem
    }

    pub fn hyper(&self) -> &PsoHyper {
        &self.config.hyper
    }
}

fn finite_positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Validates `config`, fills defaults from the model catalog and prepares
/// normalized datasets. Every problem is reported, not just the first.
pub fn build_job(config: &FitConfig) -> Result<FitJob, ValidationErrors> {
    let mut errs = Collector::default();
    let spec = model_spec(config.model);
    let mut resolved = config.clone();

    for name in config.parameters.keys() {
        if spec.index_of(name).is_none() {
            errs.push(
                format!("parameters.{name}"),
                format!("{} has no parameter named '{name}'", config.model),
            );
        }
    }

    let mut ranges = Vec::with_capacity(spec.len());
    let mut table = BTreeMap::new();
    for info in spec.parameters {
        let given = config
            .parameters
            .get(info.name)
            .cloned()
            .unwrap_or(ParamSetting {
                fit: true,
                ..ParamSetting::default()
            });
        let path = format!("parameters.{}", info.name);
        let min = given.min.unwrap_or(info.min);
        let max = given.max.unwrap_or(info.max);
        let mut ok = true;
        if !min.is_finite() || !max.is_finite() {
            errs.push(&path, "bounds must be finite");
            ok = false;
        } else if min > max {
            errs.push(&path, format!("min {min} exceeds max {max}"));
            ok = false;
        }
        let value = match given.value {
            Some(v) if !v.is_finite() => {
                errs.push(format!("{path}.value"), "value must be finite");
                ok = false;
                None
            }
            Some(v) => Some(v),
            None if min == max && ok => Some(min),
            None => None,
        };
        let range = if given.fit {
            (min, max)
        } else {
            match value {
                Some(v) => (v, v),
                None => {
                    errs.push(
                        format!("{path}.value"),
                        "a value is required for parameters that are not fitted",
                    );
                    ok = false;
                    (min, max)
                }
            }
        };
        ranges.push(if ok { range } else { (0.0, 0.0) });
        table.insert(
            info.name.to_string(),
            ParamSetting {
                value,
                min: Some(min),
                max: Some(max),
                fit: given.fit,
            },
        );
    }
    resolved.parameters = table;

    let normalize_to = config.normalize_to.unwrap_or(spec.default_normalize_to);
    resolved.normalize_to = Some(normalize_to);
    if !(normalize_to.is_finite() && normalize_to >= 0.0) {
        errs.push("normalize_to", "must be a non-negative finite number");
    }

    if let Err(e) = config.stimulus.validate() {
        errs.push("stimulus", e.to_string());
    }

    let protocol = config.protocol;
    if protocol.num_stimuli == 0 {
        errs.push("protocol.num_stimuli", "must be at least 1");
    }
    if !finite_positive(protocol.dt) {
        errs.push("protocol.dt", "must be positive");
    }
    if !finite_positive(protocol.sample_interval) {
        errs.push("protocol.sample_interval", "must be positive");
    }
    let protocol_ok = protocol.num_stimuli > 0
        && finite_positive(protocol.dt)
        && finite_positive(protocol.sample_interval);
    if protocol_ok {
        if let Err(e) = protocol
            .pacing(protocol.sample_interval.max(1.0) * 100.0)
            .validate()
        {
            if matches!(e, crate::simulator::SimulationError::SampleInterval { .. }) {
                errs.push("protocol.sample_interval", e.to_string());
            }
        }
    }

    for (name, e) in config.hyper.errors() {
        errs.push(format!("hyper.{name}"), e.to_string());
    }

    if config.datasets.is_empty() {
        errs.push("datasets", "at least one dataset is required");
    }
    let mut datasets = Vec::with_capacity(config.datasets.len());
    for (i, d) in config.datasets.iter().enumerate() {
        let path = format!("datasets[{i}]");
        let cl = d.cycle_length();
        let mut cl_ok = finite_positive(cl);
        if !cl_ok {
            errs.push(format!("{path}.cycle_length"), "must be positive");
        } else if protocol_ok {
            if let Err(e) = protocol.pacing(cl).validate() {
                errs.push(format!("{path}.cycle_length"), e.to_string());
                cl_ok = false;
            }
        }
        let weight = match d {
            DatasetConfig::Voltage { weight, .. } | DatasetConfig::Apd { weight, .. } => *weight,
        };
        if !(weight.is_finite() && weight >= 0.0) {
            errs.push(
                format!("{path}.weight"),
                "must be a non-negative finite number",
            );
        }
        let label = d.label_or(i);
        match d {
            DatasetConfig::Voltage { samples, .. } => {
                if samples.is_empty() {
                    errs.push(format!("{path}.samples"), "no samples");
                    continue;
                }
                if samples.iter().any(|v| !v.is_finite()) {
                    errs.push(format!("{path}.samples"), "samples must be finite");
                    continue;
                }
                if cl_ok && protocol_ok {
                    let expected = protocol.pacing(cl).recorded_samples();
                    if samples.len() > expected {
                        errs.push(
                            format!("{path}.samples"),
                            format!(
                                "{} samples exceed the {expected} covered by {} stimuli at {cl} ms",
                                samples.len(),
                                protocol.num_stimuli
                            ),
                        );
                    }
                }
                match normalize(samples, normalize_to.max(0.0)) {
                    Ok(normalized) => datasets.push(Dataset::Voltage(VoltageDataset {
                        label,
                        samples: normalized,
                        sample_interval: protocol.sample_interval,
                        cycle_length: cl,
                        weight,
                    })),
                    Err(e) => errs.push(format!("{path}.samples"), e.to_string()),
                }
            }
            DatasetConfig::Apd {
                targets, threshold, ..
            } => {
                if targets.len() != protocol.num_stimuli {
                    errs.push(
                        format!("{path}.targets"),
                        format!(
                            "{} APD values given but the number of stimuli is {}",
                            targets.len(),
                            protocol.num_stimuli
                        ),
                    );
                }
                if targets.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                    errs.push(format!("{path}.targets"), "APDs must be non-negative");
                }
                let upper = if normalize_to > 0.0 {
                    normalize_to
                } else {
                    f64::INFINITY
                };
                if !(threshold.is_finite() && *threshold > 0.0 && *threshold < upper) {
                    errs.push(
                        format!("{path}.threshold"),
                        format!("must lie strictly between 0 and normalize_to ({normalize_to})"),
                    );
                }
                datasets.push(Dataset::Apd(ApdDataset {
                    label,
                    targets: targets.clone(),
                    threshold: *threshold,
                    cycle_length: cl,
                    weight,
                }));
            }
        }
    }

    if !errs.0.is_empty() {
        return Err(ValidationErrors(errs.0));
    }
    let bounds = Bounds::new(ranges).map_err(|e| {
        ValidationErrors(vec![FieldError {
            path: "parameters".into(),
            message: e.to_string(),
        }])
    })?;
    let problem = FitProblem::new(
        config.model,
        config.model_options,
        config.stimulus,
        protocol,
        normalize_to,
        config.alignment_margin,
        datasets,
    );
    Ok(FitJob {
        config: resolved,
        bounds,
        problem,
    })
}
