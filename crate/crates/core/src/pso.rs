//! Constriction-coefficient particle swarm optimizer.
//!
//! Random draws come from a ChaCha8 stream keyed by `(seed, particle)` and
//! positioned by iteration, so a run is bit-identical for any worker count.
//! Within an iteration each particle consumes `3 * d` uniforms: `d` for the
//! personal-best term, `d` for the global-best term and `d` for bound resets.
//! Iteration 0 uses the first `d` of its slot for initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Bounds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsoError {
    #[error("phi1 + phi2 must exceed 4 to derive chi, got {0}")]
    PhiDomain(f64),
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("chi must lie in (0, 1), got {0}")]
    Chi(f64),
    #[error("particles must be at least 1")]
    NoParticles,
    #[error("iterations must be at least 1")]
    NoIterations,
}

/// `2 / (phi - 2 + sqrt(phi^2 - 4 phi))` with `phi = phi1 + phi2`.
pub fn compute_chi(phi1: f64, phi2: f64) -> Result<f64, PsoError> {
    let phi = phi1 + phi2;
    if !phi.is_finite() || phi <= 4.0 {
        return Err(PsoError::PhiDomain(phi));
    }
    Ok(2.0 / (phi - 2.0 + (phi * phi - 4.0 * phi).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoHyper {
    pub phi1: f64,
    pub phi2: f64,
    /// Derived from `phi1 + phi2` when absent.
    pub chi: Option<f64>,
    pub gamma: f64,
    pub particles: usize,
    pub iterations: usize,
}

impl Default for PsoHyper {
    fn default() -> Self {
        Self {
            phi1: 2.05,
            phi2: 2.05,
            chi: None,
            gamma: 0.05,
            particles: 4096,
            iterations: 32,
        }
    }
}

impl PsoHyper {
    pub fn chi(&self) -> Result<f64, PsoError> {
        match self.chi {
            Some(c) if c > 0.0 && c < 1.0 => Ok(c),
            Some(c) => Err(PsoError::Chi(c)),
            None => compute_chi(self.phi1, self.phi2),
        }
    }

    /// Every violation, in field order.
    pub fn errors(&self) -> Vec<(&'static str, PsoError)> {
        let mut out = Vec::new();
        for (name, value) in [("phi1", self.phi1), ("phi2", self.phi2)] {
            if !(value.is_finite() && value >= 0.0) {
                out.push((name, PsoError::NotPositive { name, value }));
            }
        }
        if let Err(e) = self.chi() {
            out.push(("chi", e));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            out.push((
                "gamma",
                PsoError::NotPositive {
                    name: "gamma",
                    value: self.gamma,
                },
            ));
        }
        if self.particles == 0 {
            out.push(("particles", PsoError::NoParticles));
        }
        if self.iterations == 0 {
            out.push(("iterations", PsoError::NoIterations));
        }
        out
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        match self.errors().into_iter().next() {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    }
}

/// Something the swarm can minimize.
///
/// `evaluate` must return the exact error whenever it is below `cutoff`.
/// At or above the cutoff any value `>= cutoff` is acceptable, which lets
/// implementations stop early.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64], cutoff: f64) -> f64;

    /// Evaluates several points at once; results must equal per-point
    /// [`Objective::evaluate`] calls.
    fn evaluate_batch(&self, xs: &[&[f64]], cutoffs: &[f64]) -> Vec<f64> {
        xs.iter()
            .zip(cutoffs)
            .map(|(x, &c)| self.evaluate(x, c))
            .collect()
    }

    /// Preferred number of points per [`Objective::evaluate_batch`] call.
    fn batch_size(&self) -> usize {
        1
    }
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64], _cutoff: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_best_error: f64,
    /// Completed update steps; 0 right after initialization.
    pub iteration: usize,
    pub rng_seed: u64,
    /// Lowest error after initialization and after every step.
    pub history: Vec<f64>,
}

fn draws(seed: u64, particle: usize, iteration: usize, d: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64);
    // each f64 consumes two 32-bit words
    rng.set_word_pos((iteration as u128) * (3 * d as u128) * 2);
    (0..3 * d).map(|_| rng.random::<f64>()).collect()
}

fn evaluate_all<O: Objective + ?Sized>(
    objective: &O,
    positions: &[&[f64]],
    cutoffs: &[f64],
) -> Vec<f64> {
    let chunk = objective.batch_size().max(1);
    positions
        .par_chunks(chunk)
        .zip(cutoffs.par_chunks(chunk))
        .flat_map_iter(|(xs, cs)| objective.evaluate_batch(xs, cs))
        .collect()
}

/// Uniform positions, zero velocities, bests from one evaluation round.
pub fn init_swarm<O: Objective + ?Sized>(
    bounds: &Bounds,
    hyper: &PsoHyper,
    seed: u64,
    objective: &O,
) -> SwarmState {
    let d = bounds.len();
    let positions: Vec<Vec<f64>> = (0..hyper.particles)
        .into_par_iter()
        .map(|i| {
            let u = draws(seed, i, 0, d);
            bounds
                .ranges()
                .iter()
                .zip(&u)
                .map(|(&(lo, hi), &r)| if lo == hi { lo } else { lo + r * (hi - lo) })
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = positions.iter().map(Vec::as_slice).collect();
    let errors = evaluate_all(objective, &refs, &vec![f64::INFINITY; refs.len()]);
    let particles: Vec<Particle> = positions
        .into_iter()
        .zip(errors)
        .map(|(p, e)| Particle {
            velocity: vec![0.0; d],
            best_position: p.clone(),
            position: p,
            best_error: e,
        })
        .collect();
    let mut best = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.best_error < particles[best].best_error {
            best = i;
        }
    }
    SwarmState {
        global_best: particles[best].best_position.clone(),
        global_best_error: particles[best].best_error,
        particles,
        iteration: 0,
        rng_seed: seed,
        history: vec![],
    }
    .with_history_entry()
}

impl SwarmState {
    fn with_history_entry(mut self) -> Self {
        self.history.push(self.global_best_error);
        self
    }
}

fn reset(lo: f64, hi: f64, x: f64, r: f64) -> f64 {
    let span = 0.75 * (hi - lo);
    if x < lo {
        lo + r * span
    } else if x > hi {
        hi - r * span
    } else {
        x
    }
}

/// Moves one particle; returns its new position and velocity.
fn advance(
    particle: &Particle,
    global_best: &[f64],
    bounds: &Bounds,
    hyper: &PsoHyper,
    chi: f64,
    u: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let d = bounds.len();
    let mut pos = Vec::with_capacity(d);
    let mut vel = Vec::with_capacity(d);
    for k in 0..d {
        let (lo, hi) = bounds.get(k);
        if lo == hi {
            pos.push(lo);
            vel.push(0.0);
            continue;
        }
        let p = particle.position[k];
        let v = chi
            * (particle.velocity[k]
                + hyper.phi1 * u[k] * (particle.best_position[k] - p)
                + hyper.phi2 * u[d + k] * (global_best[k] - p));
        let mut x = p + hyper.gamma * v;
        if !(lo..=hi).contains(&x) {
            x = reset(lo, hi, x, u[2 * d + k]);
        }
        pos.push(x);
        vel.push(v);
    }
    (pos, vel)
}

/// One synchronous iteration: move every particle, evaluate, update bests.
pub fn step<O: Objective + ?Sized>(
    swarm: &mut SwarmState,
    hyper: &PsoHyper,
    bounds: &Bounds,
    objective: &O,
) -> Result<(), PsoError> {
    let chi = hyper.chi()?;
    let iteration = swarm.iteration + 1;
    let seed = swarm.rng_seed;
    let global_best = &swarm.global_best;
    let moved: Vec<(Vec<f64>, Vec<f64>)> = swarm
        .particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let u = draws(seed, i, iteration, bounds.len());
            advance(p, global_best, bounds, hyper, chi, &u)
        })
        .collect();
    let refs: Vec<&[f64]> = moved.iter().map(|(p, _)| p.as_slice()).collect();
    let cutoffs: Vec<f64> = swarm.particles.iter().map(|p| p.best_error).collect();
    let errors = evaluate_all(objective, &refs, &cutoffs);
    for ((particle, (pos, vel)), e) in swarm.particles.iter_mut().zip(moved).zip(errors) {
        if e < particle.best_error {
            particle.best_error = e;
            particle.best_position.clone_from(&pos);
            if e < swarm.global_best_error {
                swarm.global_best_error = e;
                swarm.global_best.clone_from(&pos);
            }
        }
        particle.position = pos;
        particle.velocity = vel;
    }
    swarm.iteration = iteration;
    swarm.history.push(swarm.global_best_error);
    Ok(())
}

/// Initializes and runs `hyper.iterations` steps. `observe` sees the swarm
/// after initialization and after every step; returning `false` stops the
/// run early.
pub fn optimize<O, F>(
    bounds: &Bounds,
    hyper: &PsoHyper,
    seed: u64,
    objective: &O,
    mut observe: F,
) -> Result<SwarmState, PsoError>
where
    O: Objective + ?Sized,
    F: FnMut(&SwarmState) -> bool,
{
    hyper.validate()?;
    let mut swarm = init_swarm(bounds, hyper, seed, objective);
    if !observe(&swarm) {
        return Ok(swarm);
    }
    for _ in 0..hyper.iterations {
        step(&mut swarm, hyper, bounds, objective)?;
        if !observe(&swarm) {
            break;
        }
    }
    Ok(swarm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
    }

    fn unit_bounds(d: usize) -> Bounds {
        Bounds::new(vec![(-1.0, 1.0); d]).unwrap()
    }

    fn small(particles: usize, iterations: usize) -> PsoHyper {
        PsoHyper {
            particles,
            iterations,
            ..PsoHyper::default()
        }
    }

    #[test]
    fn chi_examples() {
        let c = compute_chi(2.05, 2.05).unwrap();
        assert!((c - 0.729843788).abs() < 1e-8, "{c}");
        let c = compute_chi(2.5, 2.5).unwrap();
        assert!((c - 2.0 / (3.0 + 5f64.sqrt())).abs() < 1e-15);
        assert_eq!(compute_chi(2.0, 2.0), Err(PsoError::PhiDomain(4.0)));
        assert!(compute_chi(1.0, 1.0).is_err());
    }

    #[test]
    fn hyper_validation() {
        assert!(PsoHyper::default().validate().is_ok());
        let h = PsoHyper {
            phi1: 1.0,
            phi2: 1.0,
            chi: Some(0.5),
            ..PsoHyper::default()
        };
        assert!(h.validate().is_ok());
        let h = PsoHyper {
            phi1: 1.0,
            phi2: 1.0,
            particles: 0,
            ..PsoHyper::default()
        };
        let names: Vec<_> = h.errors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["chi", "particles"]);
        let h = PsoHyper {
            chi: Some(1.5),
            ..PsoHyper::default()
        };
        assert_eq!(h.validate(), Err(PsoError::Chi(1.5)));
    }

    #[test]
    fn fixed_component_is_shared() {
        let b = Bounds::new(vec![(0.0, 1.0), (0.25, 0.25)]).unwrap();
        let s = init_swarm(&b, &small(50, 1), 9, &sphere);
        assert!(s.particles.iter().all(|p| p.position[1] == 0.25));
        assert!(s.particles.iter().all(|p| p.velocity == vec![0.0, 0.0]));
    }

    #[test]
    fn same_seed_same_swarm() {
        let b = unit_bounds(4);
        let h = small(64, 5);
        let a = optimize(&b, &h, 3, &sphere, |_| true).unwrap();
        let c = optimize(&b, &h, 3, &sphere, |_| true).unwrap();
        assert_eq!(a, c);
        let other = optimize(&b, &h, 4, &sphere, |_| true).unwrap();
        assert_ne!(a.global_best, other.global_best);
    }

    #[test]
    fn independent_of_thread_count() {
        let b = unit_bounds(3);
        let h = small(100, 6);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| optimize(&b, &h, 11, &sphere, |_| true).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn stationary_particle_keeps_drifting_with_its_velocity() {
        let b = unit_bounds(2);
        let h = small(1, 1);
        let chi = h.chi().unwrap();
        let particle = Particle {
            position: vec![0.1, -0.2],
            velocity: vec![0.5, 1.0],
            best_position: vec![0.1, -0.2],
            best_error: 1.0,
        };
        let u = vec![0.9; 6];
        let (p, v) = advance(&particle, &[0.1, -0.2], &b, &h, chi, &u);
        assert_eq!(v, vec![chi * 0.5, chi * 1.0]);
        assert_eq!(p, vec![0.1 + 0.05 * chi * 0.5, -0.2 + 0.05 * chi * 1.0]);
    }

    #[test]
    fn single_particle_single_iteration() {
        let b = unit_bounds(2);
        let s = optimize(&b, &small(1, 1), 5, &sphere, |_| true).unwrap();
        assert_eq!(s.history.len(), 2);
        let init = init_swarm(&b, &small(1, 1), 5, &sphere);
        assert_eq!(s.history[0], init.global_best_error);
        // lone particle sits on both bests with zero velocity
        assert_eq!(s.particles[0].position, init.particles[0].position);
        assert_eq!(s.global_best_error, init.global_best_error);
    }

    #[test]
    fn early_stop_keeps_partial_history() {
        let b = unit_bounds(2);
        let s = optimize(&b, &small(8, 10), 1, &sphere, |s| s.iteration < 3).unwrap();
        assert_eq!(s.history.len(), 4);
    }

    #[test]
    fn reset_interval_is_nearest_three_quarters() {
        let (lo, hi) = (2.0, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut below = (f64::INFINITY, f64::NEG_INFINITY);
        let mut above = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..10_000 {
            let r: f64 = rand::Rng::random(&mut rng);
            let x = reset(lo, hi, lo - 1.0, r);
            below = (below.0.min(x), below.1.max(x));
            let x = reset(lo, hi, hi + 1.0, r);
            above = (above.0.min(x), above.1.max(x));
        }
        assert!(below.0 >= 2.0 && below.1 <= 5.0);
        assert!(below.0 < 2.01 && below.1 > 4.99);
        assert!(above.0 >= 3.0 && above.1 <= 6.0);
        assert!(above.0 < 3.01 && above.1 > 5.99);
    }

    #[test]
    fn converges_on_sphere() {
        let b = unit_bounds(3);
        let s = optimize(&b, &small(200, 60), 2, &sphere, |_| true).unwrap();
        assert!(s.global_best_error < 1e-4, "{}", s.global_best_error);
    }

    #[test]
    fn cutoff_objective_gives_same_result() {
        struct Bounded;
        impl Objective for Bounded {
            fn evaluate(&self, x: &[f64], cutoff: f64) -> f64 {
                let mut acc = 0.0;
                for v in x {
                    acc += (v - 0.3) * (v - 0.3);
                    if acc >= cutoff {
                        return acc;
                    }
                }
                acc
            }
        }
        let b = unit_bounds(4);
        let h = small(64, 8);
        let a = optimize(&b, &h, 7, &sphere, |_| true).unwrap();
        let c = optimize(&b, &h, 7, &Bounded, |_| true).unwrap();
        assert_eq!(a.history, c.history);
        assert_eq!(a.global_best, c.global_best);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn invariants_hold(
            seed in any::<u64>(),
            d in 1usize..5,
            particles in 1usize..40,
            gamma in 0.01f64..3.0,
        ) {
            let mut ranges = vec![(-2.0, 1.0); d];
            ranges[0] = (0.5, 0.5);
            let b = Bounds::new(ranges).unwrap();
            let h = PsoHyper { particles, iterations: 8, gamma, ..PsoHyper::default() };
            let mut history_seen = Vec::new();
            let s = optimize(&b, &h, seed, &sphere, |s| {
                for p in &s.particles {
                    assert!(b.contains(&p.position));
                    assert_eq!(p.position[0], 0.5);
                    assert_eq!(p.best_error, sphere(&p.best_position));
                }
                let min = s.particles.iter().map(|p| p.best_error).fold(f64::INFINITY, f64::min);
                assert_eq!(s.global_best_error, min);
                history_seen.push(s.global_best_error);
                true
            }).unwrap();
            prop_assert_eq!(&s.history, &history_seen);
            prop_assert_eq!(s.history.len(), 9);
            prop_assert!(s.history.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(*s.history.last().unwrap(), s.global_best_error);
        }

        #[test]
        fn no_attraction_means_no_motion(seed in any::<u64>(), d in 1usize..4) {
            let b = unit_bounds(d);
            let h = PsoHyper { phi1: 0.0, phi2: 0.0, chi: Some(0.7), particles: 10, iterations: 5, ..PsoHyper::default() };
            let init = init_swarm(&b, &h, seed, &sphere);
            let s = optimize(&b, &h, seed, &sphere, |_| true).unwrap();
            for (a, c) in init.particles.iter().zip(&s.particles) {
                prop_assert_eq!(&a.position, &c.position);
            }
        }
    }
}
