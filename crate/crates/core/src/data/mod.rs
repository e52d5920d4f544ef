//! Synthetic multimodal survival cohorts, stratified folds, modality masking
//! and the `.survjsonl` / fold CSV file formats.

mod config;
mod folds;
mod generate;
mod io;
mod mask;

pub use config::GeneratorConfig;
pub use folds::{fold_censoring_fractions, stratified_folds};
pub use generate::{generate, oracle_c_index};
pub use io::{folds_csv, read_dataset, write_dataset, DatasetHeader, FORMAT_NAME, FORMAT_VERSION};
pub use mask::{mask_modality, strip_masked, Modality};

use thiserror::Error;

use crate::model::{ModelError, PatientRecord};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("censoring calibration infeasible: target {target}, closest achievable {achieved}")]
    InfeasibleCensoring { target: f64, achieved: f64 },
    #[error("{0}")]
    Contract(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Record(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Records with a fold assignment and the header describing them.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<PatientRecord>,
    /// Fold id per record, in `0..header.num_folds`.
    pub folds: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn censored_fraction(&self) -> f64 {
        censored_fraction(self.records.iter())
    }

    /// Indices of the records in `fold`.
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    /// Indices of the records outside `fold`.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let h = &self.header;
        if self.folds.len() != self.records.len() {
            return Err(DataError::Contract(format!("{} fold ids for {} records", self.folds.len(), self.len())));
        }
        if let Some(&bad) = self.folds.iter().find(|&&f| f >= h.num_folds) {
            return Err(DataError::Contract(format!("fold id {bad} outside 0..{}", h.num_folds)));
        }
        for r in &self.records {
            r.validate(h.bins, h.classes)?;
            if r.wsi_dim().is_some() && r.wsi_dim() != h.d_w {
                return Err(DataError::Contract(format!("record {}: WSI width {:?} vs header {:?}", r.id, r.wsi_dim(), h.d_w)));
            }
            if r.gene_dim().is_some() && r.gene_dim() != h.d_g {
                return Err(DataError::Contract(format!(
                    "record {}: gene length {:?} vs header {:?}",
                    r.id,
                    r.gene_dim(),
                    h.d_g
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn censored_fraction<'a>(records: impl Iterator<Item = &'a PatientRecord>) -> f64 {
    let (mut n, mut c) = (0usize, 0usize);
    for r in records {
        n += 1;
        c += usize::from(!r.label.event());
    }
    if n == 0 {
        0.0
    } else {
        c as f64 / n as f64
    }
}
