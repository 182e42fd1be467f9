//! Stochastic policy network and its REINFORCE trainer.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod train;

pub use checkpoint::{load_params, save_params, Checkpoint, CheckpointError};
pub use mlp::{Architecture, FeatureScaling, PolicyParams};
pub use train::{convergence_iteration, train, BatchStats, ConvergenceConfig, TrainConfig, TrainError, TrainOutcome, TrainSource};
