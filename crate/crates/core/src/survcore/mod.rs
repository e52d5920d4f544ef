//! Discrete-time survival head, censoring-aware loss, and evaluation statistics.

mod concordance;
mod gamma;
mod hazard;
mod kaplan_meier;
mod logrank;
mod loss;

pub use concordance::{concordance_index, Concordance};
pub use gamma::{chi2_sf, ln_gamma, regularized_gamma_q};
pub use hazard::{risk_score, survival_function, HazardVector, SurvivalLabel};
pub use kaplan_meier::{kaplan_meier, StepCurve};
pub use logrank::{log_rank_statistic, log_rank_test, permutation_p_value, LogRank};
pub use loss::{survival_loss, survival_loss_tape, LossConvention, LOG_EPS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurvError {
    #[error("invalid hazard vector: {0}")]
    InvalidHazard(String),
    #[error("invalid survival label: {0}")]
    InvalidLabel(String),
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("length mismatch: {0} risks vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("undefined: {0}")]
    Undefined(&'static str),
}
