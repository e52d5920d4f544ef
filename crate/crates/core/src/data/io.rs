use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, GeneratorConfig};
use crate::diffcore::Tensor;
use crate::model::{Availability, PatientRecord};
use crate::survcore::SurvivalLabel;

pub const FORMAT_NAME: &str = "survjsonl";
pub const FORMAT_VERSION: u32 = 1;

/// First line of a `.survjsonl` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub n_records: usize,
    /// Instance width; absent when no record has a slide bag.
    pub d_w: Option<usize>,
    /// Gene profile length; absent when no record has a gene profile.
    pub d_g: Option<usize>,
    pub bins: usize,
    pub classes: usize,
    pub num_folds: usize,
    /// Generator settings, when the data is synthetic.
    pub generator: Option<GeneratorConfig>,
}

impl DatasetHeader {
    pub fn new(
        records: &[PatientRecord],
        bins: usize,
        classes: usize,
        num_folds: usize,
        generator: Option<GeneratorConfig>,
    ) -> Self {
        Self {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            n_records: records.len(),
            d_w: records.iter().find_map(PatientRecord::wsi_dim),
            d_g: records.iter().find_map(PatientRecord::gene_dim),
            bins,
            classes,
            num_folds,
            generator,
        }
    }
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    fold: usize,
    class_id: usize,
    y: usize,
    delta: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_cont: Option<f64>,
    availability: Availability,
    #[serde(skip_serializing_if = "Option::is_none")]
    latent_risk: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wsi_bag: Option<Vec<&'a [f64]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gene_vec: Option<&'a [f64]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    id: String,
    fold: usize,
    class_id: usize,
    y: usize,
    delta: u8,
    #[serde(default)]
    t_cont: Option<f64>,
    availability: Availability,
    #[serde(default)]
    latent_risk: Option<f64>,
    #[serde(default)]
    wsi_bag: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    gene_vec: Option<Vec<f64>>,
}

/// Writes the header line followed by one JSON object per record.
pub fn write_dataset(dataset: &Dataset, mut out: impl Write) -> Result<(), DataError> {
    let header = serde_json::to_string(&dataset.header).map_err(std::io::Error::other)?;
    writeln!(out, "{header}")?;
    for (r, &fold) in dataset.records.iter().zip(&dataset.folds) {
        let (bag, gene) = r.raw_payloads();
        let line = RecordOut {
            id: &r.id,
            fold,
            class_id: r.class_id,
            y: r.label.y,
            delta: r.label.delta,
            t_cont: r.label.t_cont,
            availability: r.availability(),
            latent_risk: r.latent_risk,
            wsi_bag: bag.map(|b| (0..b.rows()).map(|i| b.row_slice(i)).collect()),
            gene_vec: gene,
        };
        let line = serde_json::to_string(&line).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses a `.survjsonl` stream and validates the result.
pub fn read_dataset(input: impl BufRead) -> Result<Dataset, DataError> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, first) = lines.next().ok_or(DataError::Parse { line: 1, message: "missing header line".into() })?;
    let header: DatasetHeader =
        serde_json::from_str(&first?).map_err(|e| DataError::Parse { line: 1, message: format!("header: {e}") })?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(DataError::Parse {
            line: 1,
            message: format!("unsupported format {} v{}", header.format, header.version),
        });
    }
    let mut records = Vec::with_capacity(header.n_records);
    let mut folds = Vec::with_capacity(header.n_records);
    for (idx, line) in lines {
        let parse_err = |message: String| DataError::Parse { line: idx + 1, message };
        let rec: RecordIn = serde_json::from_str(&line?).map_err(|e| parse_err(e.to_string()))?;
        let bag = match rec.wsi_bag {
            Some(rows) => Some(Tensor::from_rows(&rows).map_err(|e| parse_err(e.to_string()))?),
            None => None,
        };
        let label = SurvivalLabel { y: rec.y, delta: rec.delta, t_cont: rec.t_cont };
        let mut record = PatientRecord::new(rec.id, bag, rec.gene_vec, label, rec.class_id)
            .map_err(|e| parse_err(e.to_string()))?;
        record.set_availability(rec.availability).map_err(|e| parse_err(e.to_string()))?;
        record.latent_risk = rec.latent_risk;
        records.push(record);
        folds.push(rec.fold);
    }
    if records.len() != header.n_records {
        return Err(DataError::Parse {
            line: 1,
            message: format!("header announces {} records, found {}", header.n_records, records.len()),
        });
    }
    let ds = Dataset { header, records, folds };
    ds.validate()?;
    Ok(ds)
}

/// Fold assignment as CSV `record_id,fold`.
pub fn folds_csv(dataset: &Dataset) -> String {
    let mut out = String::from("record_id,fold\n");
    for (r, f) in dataset.records.iter().zip(&dataset.folds) {
        writeln!(out, "{},{f}", r.id).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, mask_modality, Modality};

    fn roundtrip(ds: &Dataset) -> Vec<u8> {
        let mut a = Vec::new();
        write_dataset(ds, &mut a).unwrap();
        let back = read_dataset(a.as_slice()).unwrap();
        let mut b = Vec::new();
        write_dataset(&back, &mut b).unwrap();
        assert_eq!(a, b);
        a
    }

    #[test]
    fn header_plus_one_line_per_record() {
        let ds = generate(&GeneratorConfig { folds: 2, ..GeneratorConfig::new(10, 1.0, 1) }).unwrap();
        let bytes = roundtrip(&ds);
        assert_eq!(String::from_utf8(bytes).unwrap().lines().count(), 11);
    }

    #[test]
    fn masks_and_gene_free_records_survive() {
        let ds = generate(&GeneratorConfig::new(20, 1.0, 1)).unwrap();
        roundtrip(&mask_modality(&ds, Modality::Gene, 0.5, 3).unwrap());

        let records: Vec<PatientRecord> = ds
            .records
            .iter()
            .map(|r| PatientRecord::new(r.id.clone(), r.raw_payloads().0.cloned(), None, r.label, r.class_id).unwrap())
            .collect();
        let header = DatasetHeader::new(&records, 4, 4, 5, None);
        assert_eq!(header.d_g, None);
        let gene_free = Dataset { header, records, folds: ds.folds.clone() };
        let bytes = roundtrip(&gene_free);
        assert!(!String::from_utf8(bytes).unwrap().contains("gene_vec"));
    }

    #[test]
    fn malformed_input_reports_line() {
        let ds = generate(&GeneratorConfig::new(10, 1.0, 1)).unwrap();
        let mut a = Vec::new();
        write_dataset(&ds, &mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "{\"id\": 5}";
        match read_dataset(lines.join("\n").as_bytes()) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let truncated = lines[..5].join("\n");
        assert!(read_dataset(truncated.as_bytes()).is_err());
    }

    #[test]
    fn folds_csv_format() {
        let ds = generate(&GeneratorConfig { folds: 2, ..GeneratorConfig::new(10, 1.0, 1) }).unwrap();
        let csv = folds_csv(&ds);
        assert!(csv.starts_with("record_id,fold\np00,"));
        assert_eq!(csv.lines().count(), 11);
    }
}
