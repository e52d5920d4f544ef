use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::survcore::LossConvention;

/// How latents of the observed modalities are combined before recovery.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    Mean,
    Learned,
}

/// Architecture and optimisation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Shared embedding width (even).
    pub d: usize,
    /// Attention rank per head.
    pub d_r: usize,
    /// Number of discrete time bins K.
    pub bins: usize,
    /// Number of risk classes C.
    pub classes: usize,
    /// Coupling layers per flow.
    pub flow_layers: usize,
    pub flow_hidden: usize,
    pub encoder_hidden: usize,
    /// Hidden width of the gated attention pooling.
    pub pool_hidden: usize,
    pub decoder_hidden: usize,
    pub heads: usize,
    pub tucker: bool,
    pub ffn_hidden: usize,
    pub fusion: FusionMode,
    pub lambda_recon: f64,
    pub lambda_align: f64,
    pub lambda_cdt: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Probability per batch of hiding one modality of complete records.
    pub curriculum_rate: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    /// Share of the training records held out for early stopping.
    pub validation_fraction: f64,
    pub loss_convention: LossConvention,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 32,
            d_r: 8,
            bins: 4,
            classes: 4,
            flow_layers: 4,
            flow_hidden: 32,
            encoder_hidden: 64,
            pool_hidden: 16,
            decoder_hidden: 32,
            heads: 1,
            tucker: true,
            ffn_hidden: 64,
            fusion: FusionMode::Mean,
            lambda_recon: 0.1,
            lambda_align: 0.05,
            lambda_cdt: 0.1,
            learning_rate: 0.001,
            epochs: 50,
            batch_size: 1,
            patience: 10,
            curriculum_rate: 0.3,
            grad_clip: 5.0,
            validation_fraction: 0.15,
            loss_convention: LossConvention::AsWritten,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("d", self.d),
            ("d_r", self.d_r),
            ("bins", self.bins),
            ("classes", self.classes),
            ("flow_layers", self.flow_layers),
            ("flow_hidden", self.flow_hidden),
            ("encoder_hidden", self.encoder_hidden),
            ("pool_hidden", self.pool_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("heads", self.heads),
            ("ffn_hidden", self.ffn_hidden),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(ModelError::Config(format!("`{key}` must be positive")));
            }
        }
        if !self.d.is_multiple_of(2) {
            return Err(ModelError::Config(format!("`d` must be even, got {}", self.d)));
        }
        if self.d_r > self.d {
            return Err(ModelError::Config(format!("`d_r` ({}) must not exceed `d` ({})", self.d_r, self.d)));
        }
        for (key, v) in [
            ("lambda_recon", self.lambda_recon),
            ("lambda_align", self.lambda_align),
            ("lambda_cdt", self.lambda_cdt),
            ("grad_clip", self.grad_clip),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::Config(format!("`{key}` must be finite and non-negative, got {v}")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config(format!("`learning_rate` must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..=1.0).contains(&self.curriculum_rate) {
            return Err(ModelError::Config(format!("`curriculum_rate` must lie in [0, 1], got {}", self.curriculum_rate)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ModelError::Config(format!(
                "`validation_fraction` must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}
