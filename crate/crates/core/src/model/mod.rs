//! Cell model definitions: parameter catalogs, default bounds, resting
//! states, and derivative evaluation.

mod catalog;
pub(crate) mod kinetics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::ParamInfo;
pub(crate) use kinetics::{Cell, Kinetics, MitchellSchaeffer};

/// The six supported phenomenological models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Mfhn,
    Ms,
    Mms,
    Fk,
    Bocf,
    Bbocf,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::Mfhn,
        ModelId::Ms,
        ModelId::Mms,
        ModelId::Fk,
        ModelId::Bocf,
        ModelId::Bbocf,
    ];

    /// Lowercase identifier used in URLs, file names and flags.
    pub fn key(self) -> &'static str {
        match self {
            ModelId::Mfhn => "mfhn",
            ModelId::Ms => "ms",
            ModelId::Mms => "mms",
            ModelId::Fk => "fk",
            ModelId::Bocf => "bocf",
            ModelId::Bbocf => "bbocf",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelId::Mfhn => "Modified FitzHugh-Nagumo",
            ModelId::Ms => "Mitchell-Schaeffer",
            ModelId::Mms => "Modified Mitchell-Schaeffer",
            ModelId::Fk => "Fenton-Karma",
            ModelId::Bocf => "Bueno-Orovio-Cherry-Fenton",
            ModelId::Bbocf => "Brugada Bueno-Orovio-Cherry-Fenton",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown model '{0}' (expected one of mfhn, ms, mms, fk, bocf, bbocf)")]
pub struct UnknownModel(pub String);

impl FromStr for ModelId {
    type Err = UnknownModel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        ModelId::ALL
            .into_iter()
            .find(|m| m.key() == lower)
            .ok_or_else(|| UnknownModel(s.to_string()))
    }
}

/// How the Brugada variant combines its two time constants inside the
/// `tau_w_plus(w)` and `tau_si(s)` sigmoids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrugadaTauForm {
    /// `tau1 + (tau2 + tau1) * sigma`
    #[default]
    Sum,
    /// `tau1 + (tau2 - tau1) * sigma`
    Difference,
}

/// Switches that alter model equations without changing the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    #[serde(default)]
    pub brugada_tau_form: BrugadaTauForm,
}

/// Static description of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub id: ModelId,
    pub parameters: &'static [ParamInfo],
    pub state_labels: &'static [&'static str],
    pub default_normalize_to: f64,
}

impl ModelSpec {
    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn parameter_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.parameters.iter().map(|p| p.name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn default_bounds(&self) -> Bounds {
        Bounds {
            ranges: self.parameters.iter().map(|p| (p.min, p.max)).collect(),
        }
    }
}

pub fn model_spec(id: ModelId) -> ModelSpec {
    let (parameters, state_labels, default_normalize_to): (_, &'static [&'static str], _) = match id
    {
        ModelId::Mfhn => (catalog::MFHN, &["u", "v"], 1.0),
        ModelId::Ms => (catalog::MS, &["u", "h"], 1.0),
        ModelId::Mms => (catalog::MMS, &["u", "h"], 1.0),
        ModelId::Fk => (catalog::FK, &["u", "v", "w"], 1.0),
        ModelId::Bocf => (catalog::BOCF, &["u", "v", "w", "s"], 1.2),
        ModelId::Bbocf => (catalog::BBOCF, &["u", "v", "w", "s"], 1.2),
    };
    ModelSpec {
        id,
        parameters,
        state_labels,
        default_normalize_to,
    }
}

pub fn default_bounds(id: ModelId) -> Bounds {
    model_spec(id).default_bounds()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("parameter {index}: bound is not finite")]
    NotFinite { index: usize },
    #[error("parameter {index}: min {min} exceeds max {max}")]
    Inverted { index: usize, min: f64, max: f64 },
}

/// Per-parameter box constraints. `min == max` marks a fixed parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Bounds {
    ranges: Vec<(f64, f64)>,
}

impl Bounds {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self, BoundsError> {
        for (index, &(min, max)) in ranges.iter().enumerate() {
            if !min.is_finite() || !max.is_finite() {
                return Err(BoundsError::NotFinite { index });
            }
            if min > max {
                return Err(BoundsError::Inverted { index, min, max });
            }
        }
        Ok(Self { ranges })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        self.ranges[i]
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        let (min, max) = self.ranges[i];
        min == max
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.ranges.len()
            && values
                .iter()
                .zip(&self.ranges)
                .all(|(&v, &(min, max))| v >= min && v <= max)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.ranges.iter().map(|&(a, b)| 0.5 * (a + b)).collect()
    }
}

impl TryFrom<Vec<(f64, f64)>> for Bounds {
    type Error = BoundsError;

    fn try_from(ranges: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Bounds::new(ranges)
    }
}

impl From<Bounds> for Vec<(f64, f64)> {
    fn from(b: Bounds) -> Self {
        b.ranges
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("{model} expects {expected} parameters, got {got}")]
    WrongLength {
        model: ModelId,
        expected: usize,
        got: usize,
    },
    #[error("parameter '{name}' is not finite")]
    NotFinite { name: &'static str },
    #[error("{model} has no parameter named '{name}'")]
    UnknownName { model: ModelId, name: String },
}

/// Parameter values aligned with the model's catalog order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    model: ModelId,
    values: Vec<f64>,
}

impl Params {
    pub fn new(model: ModelId, values: Vec<f64>) -> Result<Self, ParamsError> {
        let spec = model_spec(model);
        if values.len() != spec.len() {
            return Err(ParamsError::WrongLength {
                model,
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ParamsError::NotFinite {
                name: spec.parameters[i].name,
            });
        }
        Ok(Self { model, values })
    }

    /// Builds parameters from `(name, value)` pairs; every catalog entry must appear.
    pub fn from_named<'a>(
        model: ModelId,
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, ParamsError> {
        let spec = model_spec(model);
        let mut values = vec![f64::NAN; spec.len()];
        for (name, v) in pairs {
            let i = spec
                .index_of(name)
                .ok_or_else(|| ParamsError::UnknownName {
                    model,
                    name: name.to_string(),
                })?;
            values[i] = v;
        }
        Self::new(model, values)
    }

    pub fn model(&self) -> ModelId {
        self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        model_spec(self.model)
            .index_of(name)
            .map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ParamsError> {
        let spec = model_spec(self.model);
        let i = spec
            .index_of(name)
            .ok_or_else(|| ParamsError::UnknownName {
                model: self.model,
                name: name.to_string(),
            })?;
        if !value.is_finite() {
            return Err(ParamsError::NotFinite {
                name: spec.parameters[i].name,
            });
        }
        self.values[i] = value;
        Ok(())
    }

    /// `(name, value)` pairs in catalog order.
    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        model_spec(self.model)
            .parameters
            .iter()
            .zip(&self.values)
            .map(|(info, &v)| (info.name, v))
    }
}

/// Known-good parameter set for each model, used for synthetic data and
/// smoke tests. All values lie within the default bounds.
pub fn reference_params(id: ModelId) -> Params {
    let values: Vec<f64> = match id {
        ModelId::Mfhn => vec![0.2, 1.5, 0.01, 1.0, 0.05, 0.0, 1.0],
        ModelId::Ms => vec![0.3, 6.0, 150.0, 120.0, 0.13],
        ModelId::Mms => vec![0.1, 5.0, 150.0, 120.0, 0.13],
        ModelId::Fk => vec![
            50.0, 45.0, 667.0, 0.25, 3.33, 19.6, 1000.0, 11.0, 8.3, 10.0, 0.85, 0.13, 0.04,
        ],
        ModelId::Bocf => vec![
            0.3, 60.0, 1150.0, 1.4506, 0.03, 30.0181, 2.0458, 2.7342, 16.0, 2.0994, 60.0, 15.0,
            200.0, 0.11, 400.0, 6.0, 0.9957, 0.65, 0.9087, 1.8875, 0.13, 0.006, 0.006, 65.0, 0.07,
            0.94, 1.55,
        ],
        ModelId::Bbocf => default_bounds(id).midpoint(),
    };
    Params::new(id, values).expect("reference parameters match catalog")
}

/// Instantaneous cell state: voltage plus model-specific gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub u: f64,
    pub gates: Vec<f64>,
}

impl CellState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.gates.len());
        v.push(self.u);
        v.extend_from_slice(&self.gates);
        v
    }

    fn from_slice(s: &[f64]) -> Self {
        Self {
            u: s[0],
            gates: s[1..].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.gates.iter().all(|g| g.is_finite())
    }
}

/// Resting initial state: `u = 0` with recovered gates.
pub fn initial_state(id: ModelId) -> CellState {
    let params = reference_params(id);
    let k = Kinetics::new(id, params.values(), &ModelOptions::default());
    CellState::from_slice(&k.rest())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RhsError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("{model} state has {got} entries, expected {expected}")]
    StateShape {
        model: ModelId,
        expected: usize,
        got: usize,
    },
    #[error("parameters belong to {got}, not {expected}")]
    ModelMismatch { expected: ModelId, got: ModelId },
    #[error("derivative is not finite")]
    NonFinite,
}

/// Time derivative of the state, per ms.
pub fn rhs(
    id: ModelId,
    params: &Params,
    state: &CellState,
    i_stim: f64,
) -> Result<CellState, RhsError> {
    rhs_with(id, params, state, i_stim, &ModelOptions::default())
}

pub fn rhs_with(
    id: ModelId,
    params: &Params,
    state: &CellState,
    i_stim: f64,
    options: &ModelOptions,
) -> Result<CellState, RhsError> {
    if params.model() != id {
        return Err(RhsError::ModelMismatch {
            expected: id,
            got: params.model(),
        });
    }
    let expected = model_spec(id).state_labels.len();
    let s = state.to_vec();
    if s.len() != expected {
        return Err(RhsError::StateShape {
            model: id,
            expected,
            got: s.len(),
        });
    }
    let d = Kinetics::new(id, params.values(), options).derivative(&s, i_stim);
    let out = CellState::from_slice(&d);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(RhsError::NonFinite)
    }
}
