use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::diffcore::Tensor;
use crate::survcore::SurvivalLabel;

/// Which modalities may be read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Availability {
    pub wsi: bool,
    pub gene: bool,
}

impl Availability {
    pub const BOTH: Self = Self { wsi: true, gene: true };

    pub fn is_complete(self) -> bool {
        self.wsi && self.gene
    }
}

/// Read counters for the modality payloads. Cloning resets them.
#[derive(Debug, Default)]
struct AccessLog {
    wsi: AtomicU64,
    gene: AtomicU64,
}

impl Clone for AccessLog {
    fn clone(&self) -> Self {
        Self::default()
    }
}

/// One patient: a bag of slide-instance features, a gene profile, the
/// survival label and the discrete risk class.
///
/// Payloads are only reachable through [`wsi`](Self::wsi) and
/// [`gene`](Self::gene), which honour the availability flags and count reads.
#[derive(Clone, Debug)]
pub struct PatientRecord {
    pub id: String,
    wsi_bag: Option<Tensor>,
    gene_vec: Option<Vec<f64>>,
    pub label: SurvivalLabel,
    /// 1-based risk class.
    pub class_id: usize,
    availability: Availability,
    /// Generator ground truth, if known. Never used by the model.
    pub latent_risk: Option<f64>,
    access: AccessLog,
}

impl PatientRecord {
    /// Availability starts as "whatever payload is present".
    pub fn new(
        id: impl Into<String>,
        wsi_bag: Option<Tensor>,
        gene_vec: Option<Vec<f64>>,
        label: SurvivalLabel,
        class_id: usize,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if let Some(bag) = &wsi_bag {
            if bag.shape().len() != 2 || bag.rows() == 0 {
                return Err(ModelError::Contract(format!("record {id}: WSI bag must be a non-empty matrix")));
            }
        }
        let availability = Availability { wsi: wsi_bag.is_some(), gene: gene_vec.is_some() };
        let mut rec = Self { id, wsi_bag, gene_vec, label, class_id, availability, latent_risk: None, access: AccessLog::default() };
        rec.set_availability(availability)?;
        Ok(rec)
    }

    pub fn availability(&self) -> Availability {
        self.availability
    }

    /// Fails if both flags are off or a flag is on without a payload.
    pub fn set_availability(&mut self, a: Availability) -> Result<(), ModelError> {
        if !a.wsi && !a.gene {
            return Err(ModelError::Contract(format!("record {}: no modality available", self.id)));
        }
        if (a.wsi && self.wsi_bag.is_none()) || (a.gene && self.gene_vec.is_none()) {
            return Err(ModelError::Contract(format!("record {}: flagged modality has no data", self.id)));
        }
        self.availability = a;
        Ok(())
    }

    /// Deletes the payload of every modality flagged unavailable.
    pub fn drop_unavailable(&mut self) {
        if !self.availability.wsi {
            self.wsi_bag = None;
        }
        if !self.availability.gene {
            self.gene_vec = None;
        }
    }

    pub fn has_wsi_data(&self) -> bool {
        self.wsi_bag.is_some()
    }

    pub fn has_gene_data(&self) -> bool {
        self.gene_vec.is_some()
    }

    /// Slide bag, if available. Counts as a read.
    pub fn wsi(&self) -> Option<&Tensor> {
        if !self.availability.wsi {
            return None;
        }
        self.access.wsi.fetch_add(1, Ordering::Relaxed);
        self.wsi_bag.as_ref()
    }

    /// Gene profile, if available. Counts as a read.
    pub fn gene(&self) -> Option<&[f64]> {
        if !self.availability.gene {
            return None;
        }
        self.access.gene.fetch_add(1, Ordering::Relaxed);
        self.gene_vec.as_deref()
    }

    pub fn wsi_reads(&self) -> u64 {
        self.access.wsi.load(Ordering::Relaxed)
    }

    pub fn gene_reads(&self) -> u64 {
        self.access.gene.load(Ordering::Relaxed)
    }

    /// Payload access for serialization; bypasses flags and counters.
    pub fn raw_payloads(&self) -> (Option<&Tensor>, Option<&[f64]>) {
        (self.wsi_bag.as_ref(), self.gene_vec.as_deref())
    }

    pub fn wsi_dim(&self) -> Option<usize> {
        self.wsi_bag.as_ref().map(Tensor::cols)
    }

    pub fn gene_dim(&self) -> Option<usize> {
        self.gene_vec.as_ref().map(Vec::len)
    }

    pub fn validate(&self, bins: usize, classes: usize) -> Result<(), ModelError> {
        self.label.validate(bins).map_err(|e| ModelError::Contract(format!("record {}: {e}", self.id)))?;
        if self.class_id < 1 || self.class_id > classes {
            return Err(ModelError::Contract(format!(
                "record {}: class {} outside 1..={classes}",
                self.id, self.class_id
            )));
        }
        let finite = self.wsi_bag.as_ref().is_none_or(Tensor::all_finite)
            && self.gene_vec.as_ref().is_none_or(|g| g.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(ModelError::Contract(format!("record {}: non-finite features", self.id)));
        }
        Ok(())
    }
}
