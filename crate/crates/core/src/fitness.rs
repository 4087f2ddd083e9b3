//! Scalar error of a candidate parameterization against a set of datasets.
//!
//! Voltage datasets contribute the mean squared difference after aligning
//! first upstrokes; APD datasets contribute the mean absolute APD difference
//! in ms. Each dataset's mean is multiplied by its weight and the products
//! are summed. Divergent simulations score [`SENTINEL`].

use serde::{Deserialize, Serialize};

use crate::dataio::{ApdDataset, Dataset, VoltageDataset};
use crate::model::{ModelId, ModelOptions};
use crate::pso::Objective;
use crate::simulator::{measure_apds, Protocol, Simulator, Trace};
use crate::stimulus::StimulusConfig;

/// Error assigned to divergent parameterizations: the largest finite `f64`,
/// so swarm ranking stays total.
pub const SENTINEL: f64 = f64::MAX;

/// First index-space position where `samples` rises through `threshold`,
/// linearly interpolated.
fn first_upward_crossing(samples: &[f64], threshold: f64) -> Option<f64> {
    samples.windows(2).enumerate().find_map(|(j, w)| {
        (w[0] < threshold && w[1] >= threshold)
            .then(|| j as f64 + (threshold - w[0]) / (w[1] - w[0]))
    })
}

/// Sample offset of the model's first upstroke relative to the data's.
///
/// Both upstrokes are taken at half of `normalize_to` (or half the data
/// maximum when normalization is bypassed). Returns 0 when either series
/// never crosses.
pub fn align_first_upstroke(model: &Trace, data: &VoltageDataset, normalize_to: f64) -> i64 {
    let threshold = if normalize_to == 0.0 {
        0.5 * data
            .samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.5 * normalize_to
    };
    match (
        first_upward_crossing(&model.samples, threshold),
        first_upward_crossing(&data.samples, threshold),
    ) {
        (Some(m), Some(d)) => m.round() as i64 - d.round() as i64,
        _ => 0,
    }
}

fn voltage_sse(model: &Trace, data: &[f64], shift: i64) -> f64 {
    let m = &model.samples;
    data.iter()
        .enumerate()
        .map(|(i, &d)| {
            let k = i as i64 + shift;
            let mv = if k >= 0 && (k as usize) < m.len() {
                m[k as usize]
            } else {
                0.0
            };
            (mv - d) * (mv - d)
        })
        .sum()
}

/// Mean squared error between `model[i + shift]` and `data[i]`; model
/// samples outside the trace count as 0.
pub fn voltage_error(model: &Trace, data: &VoltageDataset, shift: i64) -> f64 {
    if model.diverged || data.samples.is_empty() {
        return SENTINEL;
    }
    finite_or_sentinel(voltage_sse(model, &data.samples, shift) / data.samples.len() as f64)
}

/// Mean absolute difference between measured and target APDs, ms.
pub fn apd_error(model_apds: &[f64], targets: &[f64]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let sum: f64 = model_apds
        .iter()
        .zip(targets)
        .map(|(m, t)| (m - t).abs())
        .sum();
    finite_or_sentinel(sum / targets.len() as f64)
}

/// Weighted sum of per-dataset errors. A zero weight drops its dataset even
/// when that dataset scored the sentinel.
pub fn total_error(errors: &[f64], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&e, &w) in errors.iter().zip(weights) {
        total = accumulate(total, e, w);
        if total == SENTINEL {
            break;
        }
    }
    total
}

#[inline]
fn accumulate(total: f64, error: f64, weight: f64) -> f64 {
    if weight == 0.0 {
        return total;
    }
    if error == SENTINEL {
        return SENTINEL;
    }
    finite_or_sentinel(total + weight * error)
}

fn finite_or_sentinel(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        SENTINEL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Voltage,
    Apd,
}

/// Error contribution of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetError {
    pub label: String,
    pub kind: DatasetKind,
    pub cycle_length: f64,
    /// Sum of squared voltage differences, or sum of absolute APD differences.
    pub raw: f64,
    /// `raw` divided by the number of samples or APD targets.
    pub normalized: f64,
    pub weighted: f64,
    /// Alignment shift in samples, voltage datasets only.
    pub shift: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    /// In the order the datasets were supplied.
    pub per_dataset: Vec<DatasetError>,
    pub total: f64,
    /// Number of simulations run, one per distinct cycle length.
    pub simulations: usize,
}

impl Objective for FitProblem {
    fn evaluate(&self, x: &[f64], cutoff: f64) -> f64 {
        self.evaluate_bounded(x, cutoff)
    }

    fn evaluate_batch(&self, xs: &[&[f64]], cutoffs: &[f64]) -> Vec<f64> {
        self.evaluate_bounded_batch(xs, cutoffs)
    }

    fn batch_size(&self) -> usize {
        8
    }
}

/// Model trace at one cycle length, extended by the alignment margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub cycle_length: f64,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
struct CycleGroup {
    cycle_length: f64,
    members: Vec<usize>,
}

/// Everything needed to score a parameter vector: model, stimulus, protocol,
/// and normalized datasets grouped by cycle length.
#[derive(Debug, Clone)]
pub struct FitProblem {
    model: ModelId,
    options: ModelOptions,
    stimulus: StimulusConfig,
    protocol: Protocol,
    normalize_to: f64,
    margin: usize,
    datasets: Vec<Dataset>,
    groups: Vec<CycleGroup>,
}

impl FitProblem {
    pub fn new(
        model: ModelId,
        options: ModelOptions,
        stimulus: StimulusConfig,
        protocol: Protocol,
        normalize_to: f64,
        margin: usize,
        datasets: Vec<Dataset>,
    ) -> Self {
        let mut groups: Vec<CycleGroup> = Vec::new();
        for (i, d) in datasets.iter().enumerate() {
            let cl = d.cycle_length();
            match groups.iter_mut().find(|g| g.cycle_length == cl) {
                Some(g) => g.members.push(i),
                None => groups.push(CycleGroup {
                    cycle_length: cl,
                    members: vec![i],
                }),
            }
        }
        Self {
            model,
            options,
            stimulus,
            protocol,
            normalize_to,
            margin,
            datasets,
            groups,
        }
    }

    pub fn model(&self) -> ModelId {
        self.model
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn normalize_to(&self) -> f64 {
        self.normalize_to
    }

    /// Distinct cycle lengths in first-appearance order.
    pub fn cycle_lengths(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.cycle_length).collect()
    }

    fn simulate(&self, sim: &Simulator, cycle_length: f64) -> Trace {
        let pacing = self.protocol.pacing(cycle_length);
        sim.run(&pacing, self.margin).unwrap_or_else(|_| Trace {
            samples: Vec::new(),
            sample_interval: pacing.sample_interval,
            t0: 0.0,
            diverged: true,
        })
    }

    fn score(&self, index: usize, trace: &Trace) -> DatasetError {
        match &self.datasets[index] {
            Dataset::Voltage(d) => {
                let shift = align_first_upstroke(trace, d, self.normalize_to);
                let (raw, normalized) = if trace.diverged {
                    (SENTINEL, SENTINEL)
                } else {
                    let raw = finite_or_sentinel(voltage_sse(trace, &d.samples, shift));
                    (raw, voltage_error(trace, d, shift))
                };
                DatasetError {
                    label: d.label.clone(),
                    kind: DatasetKind::Voltage,
                    cycle_length: d.cycle_length,
                    raw,
                    normalized,
                    weighted: accumulate(0.0, normalized, d.weight),
                    shift: Some(shift),
                }
            }
            Dataset::Apd(d) => {
                let (raw, normalized) = self.apd_score(d, trace);
                DatasetError {
                    label: d.label.clone(),
                    kind: DatasetKind::Apd,
                    cycle_length: d.cycle_length,
                    raw,
                    normalized,
                    weighted: accumulate(0.0, normalized, d.weight),
                    shift: None,
                }
            }
        }
    }

    fn apd_score(&self, d: &ApdDataset, trace: &Trace) -> (f64, f64) {
        if trace.diverged {
            return (SENTINEL, SENTINEL);
        }
        let pacing = self.protocol.pacing(d.cycle_length);
        let apds = measure_apds(trace, d.threshold, &pacing).durations;
        let normalized = apd_error(&apds, &d.targets);
        let raw = finite_or_sentinel(normalized * d.targets.len() as f64);
        (raw, normalized)
    }

    /// Full evaluation with per-dataset detail.
    pub fn evaluate(&self, values: &[f64]) -> FitnessBreakdown {
        let sim = Simulator::from_values(self.model, values, &self.stimulus, &self.options);
        let mut slots: Vec<Option<DatasetError>> = vec![None; self.datasets.len()];
        let mut total = 0.0;
        for g in &self.groups {
            let trace = self.simulate(&sim, g.cycle_length);
            for &i in &g.members {
                let e = self.score(i, &trace);
                total = accumulate(total, e.normalized, self.datasets[i].weight());
                slots[i] = Some(e);
            }
        }
        FitnessBreakdown {
            per_dataset: slots
                .into_iter()
                .map(|e| e.expect("every dataset scored"))
                .collect(),
            total,
            simulations: self.groups.len(),
        }
    }

    /// Total error, abandoning work once the running sum reaches `cutoff`.
    ///
    /// The result is exact whenever it is below `cutoff`; otherwise it is
    /// some value `>= cutoff`.
    pub fn evaluate_bounded(&self, values: &[f64], cutoff: f64) -> f64 {
        let sim = Simulator::from_values(self.model, values, &self.stimulus, &self.options);
        let mut total = 0.0;
        for g in &self.groups {
            let trace = self.simulate(&sim, g.cycle_length);
            for &i in &g.members {
                let d = &self.datasets[i];
                if d.weight() == 0.0 {
                    continue;
                }
                total = accumulate(total, self.normalized_error(i, &trace), d.weight());
            }
            if total >= cutoff {
                return total;
            }
        }
        total
    }

    /// [`FitProblem::evaluate_bounded`] for several points, simulating them
    /// in lockstep. Points drop out once their running sum reaches their cutoff.
    pub fn evaluate_bounded_batch(&self, xs: &[&[f64]], cutoffs: &[f64]) -> Vec<f64> {
        let sims: Vec<Simulator> = xs
            .iter()
            .map(|x| Simulator::from_values(self.model, x, &self.stimulus, &self.options))
            .collect();
        let mut totals = vec![0.0; xs.len()];
        let mut active: Vec<usize> = (0..xs.len()).collect();
        for g in &self.groups {
            if active.is_empty() {
                break;
            }
            let batch: Vec<Simulator> = active.iter().map(|&i| sims[i].clone()).collect();
            let traces = self.simulate_batch(&batch, g.cycle_length);
            for (&i, trace) in active.iter().zip(&traces) {
                for &m in &g.members {
                    let d = &self.datasets[m];
                    if d.weight() == 0.0 {
                        continue;
                    }
                    totals[i] = accumulate(totals[i], self.normalized_error(m, trace), d.weight());
                }
            }
            active.retain(|&i| totals[i] < cutoffs[i]);
        }
        totals
    }

    fn simulate_batch(&self, sims: &[Simulator], cycle_length: f64) -> Vec<Trace> {
        let pacing = self.protocol.pacing(cycle_length);
        Simulator::run_batch(sims, &pacing, self.margin).unwrap_or_else(|_| {
            vec![
                Trace {
                    samples: Vec::new(),
                    sample_interval: pacing.sample_interval,
                    t0: 0.0,
                    diverged: true,
                };
                sims.len()
            ]
        })
    }

    fn normalized_error(&self, index: usize, trace: &Trace) -> f64 {
        match &self.datasets[index] {
            Dataset::Voltage(v) => {
                let shift = align_first_upstroke(trace, v, self.normalize_to);
                voltage_error(trace, v, shift)
            }
            Dataset::Apd(a) => self.apd_score(a, trace).1,
        }
    }

    /// Model traces for every distinct cycle length.
    pub fn traces(&self, values: &[f64]) -> Vec<CycleTrace> {
        let sim = Simulator::from_values(self.model, values, &self.stimulus, &self.options);
        self.groups
            .iter()
            .map(|g| CycleTrace {
                cycle_length: g.cycle_length,
                trace: self.simulate(&sim, g.cycle_length),
            })
            .collect()
    }
}
