//! Invertible affine-coupling flows with exact log-likelihood, class-specific
//! Gaussian priors, latent fusion, inverse-flow recovery, and the flow-side losses.

mod coupling;
mod decoder;
mod flow;
mod fusion;
mod losses;
mod mlp;
mod prior;

pub use coupling::{CouplingLayer, CouplingOutput, S_MAX};
pub use decoder::Decoder;
pub use flow::{flow_forward, flow_forward_rows, flow_inverse, flow_inverse_rows, FlowModel, FlowOutput, FlowSpec};
pub use fusion::{fuse_latents, fuse_latents_tape, Fusion};
pub use losses::{
    align_loss, align_loss_tape, cdt_loss, cdt_loss_tape, recon_loss, recon_loss_tape, recover_missing,
    recover_missing_tape,
};
pub use mlp::{Activation, Mlp};
pub use prior::{class_prior_logpdf, infer_class, init_class_prior, ClassPrior};

use thiserror::Error;

use crate::diffcore::DiffError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("flow dimension must be even and positive, got {0}")]
    OddDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("unknown class id {class} (classes are 1..={classes})")]
    UnknownClass { class: usize, classes: usize },
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
}
