//! Low-rank bilinear attention, Tucker-factorized projections, the
//! Low-Rank Multimodal Transformer block, and attention FLOP accounting.

mod attention;
mod block;
mod flops;
mod tucker;

pub use attention::{attention_weights_csv, dense_attention, low_rank_attention, Attention, LowRankAttentionParams};
pub use block::{lrmt_block, LrmtBlock, LrmtConfig, LrmtOutput, Projection};
pub use flops::{attention_flop_count, AttentionVariant};
pub use tucker::{tucker_materialize, TuckerFactors};

use thiserror::Error;

use crate::diffcore::DiffError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttnError {
    #[error("attention rank {rank} exceeds model width {d}")]
    RankTooLarge { rank: usize, d: usize },
    #[error("attention rank must be at least 1")]
    ZeroRank,
    #[error("input has no tokens")]
    NoTokens,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{0} contains non-finite values")]
    NonFinite(&'static str),
    #[error(transparent)]
    Diff(#[from] DiffError),
}
