use serde::{Deserialize, Serialize};

use super::SurvError;

/// Per-bin event probabilities from the softmax head; sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazardVector(Vec<f64>);

impl HazardVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(h: Vec<f64>) -> Result<Self, SurvError> {
        if h.is_empty() {
            return Err(SurvError::Empty("hazard vector"));
        }
        if h.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(SurvError::InvalidHazard(format!("entries must lie in [0, 1]: {h:?}")));
        }
        let total: f64 = h.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(SurvError::InvalidHazard(format!("entries sum to {total}, expected 1")));
        }
        Ok(Self(h))
    }

    pub fn bins(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Survival curve `S(1..=K)`.
    pub fn survival(&self) -> Vec<f64> {
        cumulative_survival(&self.0)
    }
}

/// Discrete time bin (1-based), event indicator, and optional continuous time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalLabel {
    pub y: usize,
    /// 1 = event observed, 0 = right-censored.
    pub delta: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cont: Option<f64>,
}

impl SurvivalLabel {
    pub fn new(y: usize, delta: u8, t_cont: Option<f64>) -> Result<Self, SurvError> {
        let label = Self { y, delta, t_cont };
        label.validate(usize::MAX)?;
        Ok(label)
    }

    pub fn event(&self) -> bool {
        self.delta == 1
    }

    /// Ordering time: the continuous time when known, else the bin index.
    pub fn time(&self) -> f64 {
        self.t_cont.unwrap_or(self.y as f64)
    }

    pub fn validate(&self, bins: usize) -> Result<(), SurvError> {
        if self.y < 1 || self.y > bins {
            return Err(SurvError::InvalidLabel(format!("bin {} outside 1..={bins}", self.y)));
        }
        if self.delta > 1 {
            return Err(SurvError::InvalidLabel(format!("delta must be 0 or 1, got {}", self.delta)));
        }
        if let Some(t) = self.t_cont {
            if !t.is_finite() {
                return Err(SurvError::InvalidLabel("continuous time must be finite".into()));
            }
        }
        Ok(())
    }
}

fn cumulative_survival(h: &[f64]) -> Vec<f64> {
    let mut acc = 1.0;
    h.iter()
        .map(|&p| {
            acc *= 1.0 - p;
            acc
        })
        .collect()
}

/// `S_y = prod_{j<=y} (1 - h_j)` for `y = 1..=K`.
pub fn survival_function(h: &[f64]) -> Result<Vec<f64>, SurvError> {
    if h.is_empty() {
        return Err(SurvError::Empty("survival_function"));
    }
    if let Some(bad) = h.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(SurvError::InvalidHazard(format!("hazard {bad} outside [0, 1]")));
    }
    Ok(cumulative_survival(h))
}

/// Negative expected discrete survival, `-sum_y S(y)`. Higher means riskier.
pub fn risk_score(h: &HazardVector) -> f64 {
    -h.survival().iter().sum::<f64>()
}
