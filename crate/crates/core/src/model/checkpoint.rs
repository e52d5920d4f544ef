use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError};
use crate::diffcore::NamedTensor;

pub const CHECKPOINT_FORMAT: &str = "flowsurv-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing model file: the configuration needed to rebuild the
/// architecture plus every parameter by name.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub d_w: usize,
    pub d_g: usize,
    pub config: ModelConfig,
    pub params: Vec<NamedTensor>,
}

impl Model {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            d_w: self.net.d_w,
            d_g: self.net.d_g,
            config: self.net.config.clone(),
            params: self.store.to_named(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ModelError> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::Contract(format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version)));
        }
        let mut model = Model::new(&ckpt.config, ckpt.d_w, ckpt.d_g)?;
        if ckpt.params.len() != model.store.len() {
            return Err(ModelError::Contract(format!(
                "checkpoint holds {} tensors, architecture needs {}",
                ckpt.params.len(),
                model.store.len()
            )));
        }
        model.store.load_named(&ckpt.params)?;
        Ok(model)
    }

    /// Fails with [`ModelError::DimMismatch`] if the data widths differ from
    /// the model's. `None` means the dataset carries no such modality.
    pub fn check_compatible(&self, d_w: Option<usize>, d_g: Option<usize>, bins: usize, classes: usize) -> Result<(), ModelError> {
        let checks = [
            ("WSI instance width", Some(self.net.d_w), d_w),
            ("gene profile length", Some(self.net.d_g), d_g),
            ("time bins", Some(self.net.config.bins), Some(bins)),
            ("risk classes", Some(self.net.config.classes), Some(classes)),
        ];
        for (what, model, data) in checks {
            if let (Some(m), Some(d)) = (model, data) {
                if m != d {
                    return Err(ModelError::DimMismatch { what, expected: m, got: d });
                }
            }
        }
        Ok(())
    }
}
