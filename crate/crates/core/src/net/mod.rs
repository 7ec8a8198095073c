//! Feed-forward regressor with reverse-mode differentiation, mapping
//! observation features to per-waypoint NIW evidence.

mod checkpoint;
mod link;
mod loss;
mod mlp;
mod tape;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use link::{link, raw_len, slots_per_waypoint, CHOL_DIAG_FLOOR, KAPPA_FLOOR};
pub use loss::{loss_and_grad, TrainSample};
pub use mlp::{LayerParams, Mlp, MlpGrads};
pub use tape::{GradientTape, Gradients, Var};
pub use train::{train, TrainConfig};

use thiserror::Error;

use crate::evidential::EvidentialError;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("raw output slots: expected {expected}, got {got}")]
    SlotMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss{}", .epoch.map(|e| format!(" at epoch {e}")).unwrap_or_default())]
    NonFiniteLoss { epoch: Option<usize> },
    #[error("checkpoint mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Evidential(#[from] EvidentialError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
