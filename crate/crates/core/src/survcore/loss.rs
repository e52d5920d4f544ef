use serde::{Deserialize, Serialize};

use super::{HazardVector, SurvError, SurvivalLabel};
use crate::diffcore::{Tape, Var};

/// Floor applied to every log argument in the survival loss.
pub const LOG_EPS: f64 = 1e-8;

/// Which survival terms enter the likelihood.
///
/// `AsWritten` scores an event at bin `y` with `log S(y) + log h(y)` and a
/// censoring at `y` with `log S(y + 1)` (clamped to `S(K)`). `Shifted` uses
/// `log S(y - 1) + log h(y)` with `S(0) = 1`, and `log S(y)` for censoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossConvention {
    #[default]
    AsWritten,
    Shifted,
}

impl LossConvention {
    /// 1-based survival indices for the event/censoring terms; 0 means `S(0) = 1`.
    fn survival_index(self, label: &SurvivalLabel, bins: usize) -> usize {
        match (self, label.event()) {
            (LossConvention::AsWritten, true) => label.y,
            (LossConvention::AsWritten, false) => (label.y + 1).min(bins),
            (LossConvention::Shifted, true) => label.y - 1,
            (LossConvention::Shifted, false) => label.y,
        }
    }
}

fn clamped_ln(x: f64) -> f64 {
    x.max(LOG_EPS).ln()
}

/// Negative log-likelihood summed over the batch.
pub fn survival_loss(batch: &[(HazardVector, SurvivalLabel)], convention: LossConvention) -> Result<f64, SurvError> {
    if batch.is_empty() {
        return Err(SurvError::Empty("survival_loss"));
    }
    let mut total = 0.0;
    for (h, label) in batch {
        let k = h.bins();
        label.validate(k)?;
        let s = h.survival();
        let idx = convention.survival_index(label, k);
        let s_term = if idx == 0 { 0.0 } else { clamped_ln(s[idx - 1]) };
        total -= s_term;
        if label.event() {
            total -= clamped_ln(h.as_slice()[label.y - 1]);
        }
    }
    Ok(total)
}

/// Per-record survival loss on the tape. `hazard` is a `[1, K]` row.
pub fn survival_loss_tape(tape: &Tape, hazard: Var, label: &SurvivalLabel, convention: LossConvention) -> Var {
    let bins = tape.shape(hazard)[1];
    debug_assert!(label.validate(bins).is_ok());
    let one_minus = tape.affine(hazard, -1.0, 1.0);
    let surv = tape.cumprod(one_minus);
    let idx = convention.survival_index(label, bins);
    let mut terms = Vec::with_capacity(2);
    if idx > 0 {
        terms.push(tape.log_clamped(tape.element(surv, idx - 1), LOG_EPS));
    }
    if label.event() {
        terms.push(tape.log_clamped(tape.element(hazard, label.y - 1), LOG_EPS));
    }
    match terms.len() {
        0 => tape.constant_scalar(0.0),
        _ => tape.neg(tape.add_all(&terms)),
    }
}
