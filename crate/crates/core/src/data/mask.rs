use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, DatasetHeader};
use crate::rng::substream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Wsi,
    Gene,
}

/// Marks `round(rate * n)` seed-chosen records as missing `which`. Payloads
/// are kept; only the availability flags change.
pub fn mask_modality(dataset: &Dataset, which: Modality, rate: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(DataError::Contract(format!("mask rate must lie in [0, 1], got {rate}")));
    }
    let n = dataset.len();
    let count = (rate * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, "mask"));
    let mut out = dataset.clone();
    for &i in &order[..count] {
        let record = &mut out.records[i];
        let mut a = record.availability();
        match which {
            Modality::Wsi => a.wsi = false,
            Modality::Gene => a.gene = false,
        }
        record.set_availability(a).map_err(|_| {
            DataError::Contract(format!("masking {which:?} would leave record {} with no modality", record.id))
        })?;
    }
    Ok(out)
}

/// Removes masked payloads, so the data is absent rather than hidden. The
/// header widths are recomputed; a modality no record carries loses its width.
pub fn strip_masked(dataset: &Dataset) -> Dataset {
    let mut out = dataset.clone();
    for r in &mut out.records {
        r.drop_unavailable();
    }
    let h = &dataset.header;
    out.header = DatasetHeader::new(&out.records, h.bins, h.classes, h.num_folds, h.generator.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, write_dataset, GeneratorConfig};
    use crate::model::Availability;

    fn small() -> Dataset {
        generate(&GeneratorConfig::new(40, 1.0, 2)).unwrap()
    }

    fn bytes(ds: &Dataset) -> Vec<u8> {
        let mut v = Vec::new();
        write_dataset(ds, &mut v).unwrap();
        v
    }

    #[test]
    fn zero_rate_is_identity() {
        let ds = small();
        assert_eq!(bytes(&mask_modality(&ds, Modality::Gene, 0.0, 1).unwrap()), bytes(&ds));
    }

    #[test]
    fn full_gene_mask() {
        let masked = mask_modality(&small(), Modality::Gene, 1.0, 1).unwrap();
        assert!(masked.records.iter().all(|r| r.availability() == Availability { wsi: true, gene: false }));
        assert!(masked.records.iter().all(|r| r.has_gene_data()));
    }

    #[test]
    fn half_mask_is_reproducible_with_exact_count() {
        let ds = small();
        let a = mask_modality(&ds, Modality::Wsi, 0.5, 4).unwrap();
        let b = mask_modality(&ds, Modality::Wsi, 0.5, 4).unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        assert_eq!(a.records.iter().filter(|r| !r.availability().wsi).count(), 20);
    }

    #[test]
    fn stripping_a_full_gene_mask_yields_a_gene_free_dataset() {
        let ds = strip_masked(&mask_modality(&small(), Modality::Gene, 1.0, 1).unwrap());
        assert_eq!(ds.header.d_g, None);
        assert_eq!(ds.header.d_w, Some(16));
        assert!(ds.records.iter().all(|r| !r.has_gene_data() && r.has_wsi_data()));
        let text = bytes(&ds);
        assert!(!String::from_utf8(text.clone()).unwrap().contains("gene_vec"));
        let back = crate::data::read_dataset(text.as_slice()).unwrap();
        assert_eq!(bytes(&back), text);
    }

    #[test]
    fn masking_both_modalities_fails() {
        let gene_free = mask_modality(&small(), Modality::Gene, 1.0, 1).unwrap();
        assert!(mask_modality(&gene_free, Modality::Wsi, 0.1, 1).is_err());
        assert!(mask_modality(&gene_free, Modality::Wsi, 1.5, 1).is_err());
    }
}
