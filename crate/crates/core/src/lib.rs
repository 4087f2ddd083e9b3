//! Fitting phenomenological cardiac action potential models to voltage
//! recordings and APD targets with a particle swarm.

pub mod dataio;
pub mod fitness;
pub mod model;
pub mod orchestrator;
pub mod pso;
pub mod simulator;
pub mod stimulus;

pub use dataio::{ApdDataset, Dataset, VoltageDataset};
pub use fitness::{FitProblem, FitnessBreakdown, SENTINEL};
pub use model::{Bounds, ModelId, ModelOptions, Params};
pub use pso::{compute_chi, PsoHyper};
pub use simulator::{PacingConfig, Protocol, Trace};
pub use stimulus::StimulusConfig;
