//! End-to-end multimodal survival model: encoders, class-specific flows for
//! cross-modal recovery, low-rank transformer fusion, hazard head, joint
//! objective, training and evaluation.

mod checkpoint;
mod config;
mod cv;
mod evaluate;
mod network;
mod record;
mod train;


pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{FusionMode, ModelConfig};
pub use cv::{cross_validate, train_fold, FoldRun};
pub use evaluate::{evaluate, predict_risks, MetricsReport, RiskEntry, Scenario};
pub use network::{ForwardPass, Imputation, LossBreakdown, Model, Network, WsiEncoder};
pub use record::{Availability, PatientRecord};
pub use train::{batch_gradients, inner_split, train, EpochMetrics, TrainOutcome};

use thiserror::Error;

use crate::diffcore::DiffError;
use crate::flowcore::FlowError;
use crate::lrattn::AttnError;
use crate::survcore::SurvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0}")]
    Contract(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{what} mismatch: model expects {expected}, data has {got}")]
    DimMismatch { what: &'static str, expected: usize, got: usize },
    #[error("non-finite {term} at epoch {epoch}: {detail}")]
    Numerical { epoch: usize, term: String, detail: String },
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Attn(#[from] AttnError),
    #[error(transparent)]
    Surv(#[from] SurvError),
}
