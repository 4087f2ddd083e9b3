use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::FitJob;
use crate::dataio::Dataset;
use crate::fitness::{align_first_upstroke, FitnessBreakdown};
use crate::model::{ModelId, Params};
use crate::pso::{optimize, PsoError, PsoHyper};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Pso(#[from] PsoError),
}

/// Lowest error after `iteration` steps (0 is the initial evaluation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub iteration: usize,
    pub lowest_error: f64,
}

/// Optional hooks for a run.
#[derive(Default)]
pub struct RunControl<'a> {
    /// Worker threads; all cores when `None`.
    pub threads: Option<usize>,
    /// Checked between iterations.
    pub cancel: Option<&'a AtomicBool>,
    pub progress: Option<Box<dyn FnMut(Progress) + Send + 'a>>,
}

/// Best-fit model trace lined up against one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub label: String,
    pub cycle_length: f64,
    /// Alignment shift in samples applied to the model.
    pub shift: i64,
    pub time_ms: Vec<f64>,
    pub model_u: Vec<f64>,
    /// Normalized data, absent for APD-only cycle lengths.
    pub data_u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelId,
    pub best_params: Params,
    pub best_error: f64,
    pub history: Vec<f64>,
    pub breakdown: FitnessBreakdown,
    pub traces: Vec<FitTrace>,
    pub seed: u64,
    pub hyper: PsoHyper,
    /// Resolved constriction coefficient.
    pub chi: f64,
    pub cancelled: bool,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub wall_time_s: f64,
}

impl FitResult {
    pub fn iterations_completed(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

fn build_traces(job: &FitJob, best: &[f64]) -> Vec<FitTrace> {
    let problem = job.problem();
    let cycles = problem.traces(best);
    let si = problem.protocol().sample_interval;
    let mut out = Vec::new();
    for ct in &cycles {
        let voltage: Vec<_> = problem
            .datasets()
            .iter()
            .filter_map(|d| match d {
                Dataset::Voltage(v) if v.cycle_length == ct.cycle_length => Some(v),
                _ => None,
            })
            .collect();
        if voltage.is_empty() {
            let n = problem
                .protocol()
                .pacing(ct.cycle_length)
                .recorded_samples();
            let model_u: Vec<f64> = ct.trace.samples.iter().take(n).copied().collect();
            out.push(FitTrace {
                label: format!("model@{}", ct.cycle_length),
                cycle_length: ct.cycle_length,
                shift: 0,
                time_ms: (0..model_u.len()).map(|i| i as f64 * si).collect(),
                model_u,
                data_u: None,
            });
            continue;
        }
        for v in voltage {
            let shift = align_first_upstroke(&ct.trace, v, problem.normalize_to());
            let model_u = (0..v.samples.len())
                .map(|i| {
                    let k = i as i64 + shift;
                    if k >= 0 && (k as usize) < ct.trace.samples.len() {
                        ct.trace.samples[k as usize]
                    } else {
                        0.0
                    }
                })
                .collect();
            out.push(FitTrace {
                label: v.label.clone(),
                cycle_length: ct.cycle_length,
                shift,
                time_ms: (0..v.samples.len()).map(|i| i as f64 * si).collect(),
                model_u,
                data_u: Some(v.samples.clone()),
            });
        }
    }
    out
}

/// Runs the swarm to completion or cancellation.
pub fn run_fit(job: &FitJob, control: RunControl<'_>) -> Result<FitResult, RunError> {
    let RunControl {
        threads,
        cancel,
        mut progress,
    } = control;
    let hyper = *job.hyper();
    let chi = hyper.chi()?;
    let seed = job.config().seed;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::ThreadPool(e.to_string()))?;

    let started_at = Utc::now();
    let clock = Instant::now();
    let mut cancelled = false;
    let swarm = pool.install(|| {
        optimize(job.bounds(), &hyper, seed, job.problem(), |s| {
            if let Some(p) = progress.as_mut() {
                p(Progress {
                    iteration: s.iteration,
                    lowest_error: s.global_best_error,
                });
            }
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) && s.iteration < hyper.iterations {
                cancelled = true;
                return false;
            }
            true
        })
    })?;
    let best = swarm.global_best;
    let breakdown = pool.install(|| job.problem().evaluate(&best));
    let traces = build_traces(job, &best);
    let wall_time_s = clock.elapsed().as_secs_f64();
    let finished_at = Utc::now();
    Ok(FitResult {
        model: job.config().model,
        best_params: Params::new(job.config().model, best).expect("swarm keeps catalog length"),
        best_error: swarm.global_best_error,
        history: swarm.history,
        breakdown,
        traces,
        seed,
        hyper,
        chi,
        cancelled,
        started_at,
        finished_at,
        wall_time_s,
    })
}
