use serde::{Deserialize, Serialize};

use super::config::FitJob;
use super::run::{run_fit, RunControl, RunError};
use crate::model::ModelId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: ModelId,
    pub particles: usize,
    pub iterations: usize,
    pub threads: Option<usize>,
    pub timings_s: Vec<f64>,
    pub mean_s: f64,
    /// Sample standard deviation; 0 for a single repeat.
    pub stddev_s: f64,
    pub per_iteration_mean_s: f64,
}

/// Times `repeats` complete fits of the same job.
pub fn bench(
    job: &FitJob,
    repeats: usize,
    threads: Option<usize>,
) -> Result<BenchReport, RunError> {
    let repeats = repeats.max(1);
    let mut timings_s = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let r = run_fit(
            job,
            RunControl {
                threads,
                ..RunControl::default()
            },
        )?;
        timings_s.push(r.wall_time_s);
    }
    let n = timings_s.len() as f64;
    let mean_s = timings_s.iter().sum::<f64>() / n;
    let stddev_s = if timings_s.len() > 1 {
        (timings_s.iter().map(|t| (t - mean_s).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let hyper = job.hyper();
    Ok(BenchReport {
        model: job.config().model,
        particles: hyper.particles,
        iterations: hyper.iterations,
        threads,
        timings_s,
        mean_s,
        stddev_s,
        per_iteration_mean_s: mean_s / hyper.iterations as f64,
    })
}
