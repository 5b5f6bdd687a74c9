//! Node classifiers under the MLP in/out paradigm, trained full-batch.
//!
//! Each layer computes `H ← H·W_in`, `H' ← σ(P·H)`, `H ← H'·W_out` where `P`
//! is the propagation operator of the model kind.

mod adam;
pub mod attention;
pub mod checkpoint;
mod metrics;
mod model;
pub mod tape;
mod train;

pub use adam::{Adam, BETA1, BETA2, EPSILON};
pub use attention::{attention_coefficients, Attention, AttentionParams};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use metrics::{argmax_rows, classification_scores, EpochRecord, Evaluation, Metrics};
pub use model::{
    cross_entropy, forward, forward_tape, loss_and_gradients, seeded_rng, Batch, Forward, ModelKind, ModelParams,
    Problem, TrainConfig,
};
pub use train::{evaluate, operator_energy, train, TrainOutcome};
