//! Experiment drivers: error metrics, bandwidth sweeps, and spectral
//! embedding comparisons.

pub mod align;
pub mod embedding;
pub mod metrics;
pub mod pointwise;

pub use align::{align_pair, AlignmentResult};
pub use embedding::{
    embedding_dataset, embedding_experiment, embedding_replica, harmonic_block, EmbeddingConfig, EmbeddingMethod, EmbeddingReport,
    EmbeddingRow, ReplicaEmbedding,
};
pub use metrics::{mean_std, rel_errors, slope_fit};
pub use pointwise::{
    branch_slopes, epsilon_sweep, epsilon_sweep_full, evaluate_replica, lin_grid, log_grid, noise_seed, pointwise_experiment,
    prepare_replica, PointwiseConfig, PointwiseOutcome, ReplicaData, SweepRecord, SweepRun,
};
