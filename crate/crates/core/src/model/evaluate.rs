use serde::{Deserialize, Serialize};

use super::{Availability, Imputation, Model, ModelError, PatientRecord};
use crate::parallel::Execution;
use crate::survcore::{concordance_index, risk_score, SurvError, SurvivalLabel};

/// Which modalities evaluation may read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Complete,
    MissingGene,
    MissingWsi,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Complete, Scenario::MissingGene, Scenario::MissingWsi];

    /// Record availability restricted by the scenario.
    pub fn apply(self, a: Availability) -> Availability {
        match self {
            Scenario::Complete => a,
            Scenario::MissingGene => Availability { wsi: a.wsi, gene: false },
            Scenario::MissingWsi => Availability { wsi: false, gene: a.gene },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Complete => "complete",
            Scenario::MissingGene => "missing_gene",
            Scenario::MissingWsi => "missing_wsi",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}` (expected complete, missing_gene or missing_wsi)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub id: String,
    pub risk: f64,
}

/// Evaluation output. `c_index` is `null` when the records admit no
/// comparable pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub c_index: Option<f64>,
    pub n_pairs: u64,
    pub scenario: Scenario,
    pub fold: Option<usize>,
    pub per_patient_risk: Vec<RiskEntry>,
}

/// Risk score (negative expected survival) for each listed record.
pub fn predict_risks(
    model: &Model,
    records: &[PatientRecord],
    indices: &[usize],
    scenario: Scenario,
    imputation: Imputation,
    exec: Execution,
) -> Result<Vec<f64>, ModelError> {
    exec.map(indices, |&i| {
        let r = &records[i];
        let h = model.predict(r, scenario.apply(r.availability()), imputation)?;
        Ok(risk_score(&h))
    })
    .into_iter()
    .collect()
}

/// C-index and per-patient risks over `indices` under `scenario`.
pub fn evaluate(
    model: &Model,
    records: &[PatientRecord],
    indices: &[usize],
    fold: Option<usize>,
    scenario: Scenario,
    imputation: Imputation,
    exec: Execution,
) -> Result<MetricsReport, ModelError> {
    let risks = predict_risks(model, records, indices, scenario, imputation, exec)?;
    let labels: Vec<SurvivalLabel> = indices.iter().map(|&i| records[i].label).collect();
    let (c_index, n_pairs) = match concordance_index(&risks, &labels) {
        Ok(c) => (Some(c.c_index), c.admissible_pairs),
        Err(SurvError::Undefined(_)) => (None, 0),
        Err(e) => return Err(e.into()),
    };
    let per_patient_risk =
        indices.iter().zip(&risks).map(|(&i, &risk)| RiskEntry { id: records[i].id.clone(), risk }).collect();
    Ok(MetricsReport { c_index, n_pairs, scenario, fold, per_patient_risk })
}
