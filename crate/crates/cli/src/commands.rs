use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use flowsurv::data::{self, mask_modality, read_dataset, strip_masked, write_dataset, Dataset, Modality};
use flowsurv::lrattn::{attention_flop_count, AttentionVariant};
use flowsurv::model::{
    cross_validate, evaluate, Checkpoint, EpochMetrics, Imputation, MetricsReport, Model, ModelError, Scenario,
};
use flowsurv::parallel::Execution;
use flowsurv::survcore::{kaplan_meier, log_rank_test, LogRank, SurvivalLabel};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};

/// Model and data that cannot be used together. Maps to exit code 4.
#[derive(Debug)]
pub struct Incompatible(pub String);

impl fmt::Display for Incompatible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Incompatible {}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ConfigError(format!("{what} {} does not exist", path.display())).into())
    }
}

fn create_file(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut out = create_file(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    require_file(path, "dataset")?;
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_dataset(BufReader::new(file)).with_context(|| format!("cannot read dataset {}", path.display()))
}

pub fn load_checkpoint(path: &Path) -> anyhow::Result<Model> {
    require_file(path, "checkpoint")?;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).with_context(|| format!("{} is not a checkpoint", path.display()))?;
    Ok(Model::from_checkpoint(&ckpt)?)
}

#[derive(Debug, Serialize)]
pub struct GenerateSummary {
    pub path: PathBuf,
    pub records: usize,
    pub censored_fraction: f64,
}

pub fn generate(cfg: &RunConfig) -> anyhow::Result<GenerateSummary> {
    let mut ds = data::generate(&cfg.generator)?;
    if let Some(mask) = &cfg.mask {
        ds = mask_modality(&ds, mask.modality, mask.rate, cfg.seed)?;
        if mask.drop_payload {
            ds = strip_masked(&ds);
        }
    }
    let mut out = create_file(&cfg.dataset)?;
    write_dataset(&ds, &mut out)?;
    out.flush()?;
    Ok(GenerateSummary { path: cfg.dataset.clone(), records: ds.len(), censored_fraction: ds.censored_fraction() })
}

#[derive(Debug, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub c_index: Option<f64>,
    pub n_pairs: u64,
    pub n_test: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub checkpoint: String,
    pub history: Vec<EpochMetrics>,
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub scenario: Scenario,
    pub imputation: Imputation,
    pub folds: Vec<FoldSummary>,
    pub c_index_mean: Option<f64>,
    /// Sample standard deviation across folds.
    pub c_index_std: Option<f64>,
    /// `mean ± std` to three decimals.
    pub c_index: String,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    (Some(mean), std)
}

fn check_trainable(ds: &Dataset, cfg: &RunConfig) -> anyhow::Result<()> {
    if ds.header.d_w.is_none() || ds.header.d_g.is_none() {
        return Err(Incompatible("training needs a dataset carrying both WSI bags and gene profiles".into()).into());
    }
    let m = &cfg.model;
    if ds.header.bins != m.bins || ds.header.classes != m.classes {
        return Err(Incompatible(format!(
            "dataset has {} bins and {} classes, model config has {} and {}",
            ds.header.bins, ds.header.classes, m.bins, m.classes
        ))
        .into());
    }
    Ok(())
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<TrainSummary> {
    let ds = load_dataset(&cfg.dataset)?;
    check_trainable(&ds, cfg)?;
    let folds: Vec<usize> = (0..ds.header.num_folds).collect();
    let runs = cross_validate(&ds, &cfg.model, &folds, cfg.execution)?;

    let mut fold_summaries = Vec::with_capacity(runs.len());
    for run in runs {
        let model = &run.outcome.model;
        let name = format!("fold{}.checkpoint.json", run.fold);
        write_json(&cfg.out_dir.join(&name), &model.to_checkpoint())?;
        let report =
            evaluate(model, &ds.records, &run.test_idx, Some(run.fold), cfg.scenario, cfg.imputation, cfg.execution)?;
        fold_summaries.push(FoldSummary {
            fold: run.fold,
            c_index: report.c_index,
            n_pairs: report.n_pairs,
            n_test: run.test_idx.len(),
            best_epoch: run.outcome.best_epoch,
            epochs_run: run.outcome.history.len(),
            stopped_early: run.outcome.stopped_early,
            checkpoint: name,
            history: run.outcome.history,
        });
    }
    let c: Vec<f64> = fold_summaries.iter().filter_map(|f| f.c_index).collect();
    let (mean, std) = mean_std(&c);
    let formatted = match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.3} ± {s:.3}"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "undefined".to_string(),
    };
    let summary = TrainSummary {
        seed: cfg.seed,
        scenario: cfg.scenario,
        imputation: cfg.imputation,
        folds: fold_summaries,
        c_index_mean: mean,
        c_index_std: std,
        c_index: formatted,
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Inputs shared by `evaluate` and `impute-report`.
#[derive(Clone, Debug)]
pub struct EvalInputs {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub fold: Option<usize>,
    pub imputation: Imputation,
    pub execution: Execution,
    pub out_dir: PathBuf,
}

struct Loaded {
    model: Model,
    ds: Dataset,
    indices: Vec<usize>,
}

fn load_inputs(inputs: &EvalInputs) -> anyhow::Result<Loaded> {
    let model = load_checkpoint(&inputs.checkpoint)?;
    let ds = load_dataset(&inputs.dataset)?;
    let h = &ds.header;
    model.check_compatible(h.d_w, h.d_g, h.bins, h.classes)?;
    let indices = match inputs.fold {
        Some(f) if f >= h.num_folds => {
            return Err(ConfigError(format!("fold {f} outside 0..{}", h.num_folds)).into());
        }
        Some(f) => ds.fold_indices(f),
        None => (0..ds.len()).collect(),
    };
    Ok(Loaded { model, ds, indices })
}

/// Whether every selected record keeps a modality under `scenario`.
fn applicable(ds: &Dataset, indices: &[usize], scenario: Scenario) -> bool {
    indices.iter().all(|&i| {
        let a = scenario.apply(ds.records[i].availability());
        a.wsi || a.gene
    })
}

#[derive(Debug, Serialize)]
pub struct EvaluationOutput {
    pub report: MetricsReport,
    pub log_rank: LogRank,
    pub files: Vec<PathBuf>,
}

/// Splits labels at the median risk: the higher-risk half (rounded up) first.
/// Ties are broken by record order so the split is always balanced.
fn median_split(risks: &[f64], labels: &[SurvivalLabel]) -> (Vec<SurvivalLabel>, Vec<SurvivalLabel>) {
    let mut order: Vec<usize> = (0..risks.len()).collect();
    order.sort_by(|&a, &b| risks[b].total_cmp(&risks[a]).then(a.cmp(&b)));
    let cut = risks.len().div_ceil(2);
    let high = order[..cut].iter().map(|&i| labels[i]).collect();
    let low = order[cut..].iter().map(|&i| labels[i]).collect();
    (high, low)
}

pub fn evaluate_cmd(inputs: &EvalInputs, scenario: Scenario) -> anyhow::Result<EvaluationOutput> {
    let Loaded { model, ds, indices } = load_inputs(inputs)?;
    if !applicable(&ds, &indices, scenario) {
        return Err(Incompatible(format!("scenario {} leaves some records with no modality", scenario.as_str())).into());
    }
    let report = evaluate(&model, &ds.records, &indices, inputs.fold, scenario, inputs.imputation, inputs.execution)?;
    let risks: Vec<f64> = report.per_patient_risk.iter().map(|r| r.risk).collect();
    let labels: Vec<SurvivalLabel> = indices.iter().map(|&i| ds.records[i].label).collect();
    let (high, low) = median_split(&risks, &labels);
    let log_rank = log_rank_test(&high, &low).context("log-rank test on the median risk split")?;

    let prefix = scenario.as_str();
    let files = vec![
        inputs.out_dir.join(format!("{prefix}_report.json")),
        inputs.out_dir.join(format!("{prefix}_km_high.csv")),
        inputs.out_dir.join(format!("{prefix}_km_low.csv")),
        inputs.out_dir.join(format!("{prefix}_logrank.json")),
    ];
    write_json(&files[0], &report)?;
    write_text(&files[1], &kaplan_meier(&high).to_csv())?;
    write_text(&files[2], &kaplan_meier(&low).to_csv())?;
    write_json(&files[3], &log_rank)?;
    Ok(EvaluationOutput { report, log_rank, files })
}

#[derive(Debug, Serialize)]
pub struct ScenarioComparison {
    pub scenario: Scenario,
    pub flow_c_index: Option<f64>,
    pub zero_c_index: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RecoveryError {
    /// The modality being recovered.
    pub modality: Modality,
    pub n_records: usize,
    /// Mean L2 distance between the recovered and the real embedding.
    pub flow_error: f64,
    /// Same distance for a zero embedding.
    pub zero_error: f64,
}

#[derive(Debug, Serialize)]
pub struct ImputeReport {
    pub n_records: usize,
    pub complete_c_index: Option<f64>,
    pub scenarios: Vec<ScenarioComparison>,
    /// Only records carrying both modalities contribute.
    pub recovery: Vec<RecoveryError>,
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn impute_report(inputs: &EvalInputs) -> anyhow::Result<ImputeReport> {
    let Loaded { model, ds, indices } = load_inputs(inputs)?;
    let c = |scenario, imputation| -> Result<Option<f64>, ModelError> {
        Ok(evaluate(&model, &ds.records, &indices, inputs.fold, scenario, imputation, inputs.execution)?.c_index)
    };
    let complete: Vec<usize> =
        indices.iter().copied().filter(|&i| ds.records[i].availability().is_complete()).collect();
    let complete_c_index = if complete.len() == indices.len() { c(Scenario::Complete, Imputation::Flow)? } else { None };

    let mut scenarios = Vec::new();
    for scenario in [Scenario::MissingGene, Scenario::MissingWsi] {
        if applicable(&ds, &indices, scenario) {
            scenarios.push(ScenarioComparison {
                scenario,
                flow_c_index: c(scenario, Imputation::Flow)?,
                zero_c_index: c(scenario, Imputation::Zero)?,
            });
        }
    }

    let mut recovery = Vec::new();
    if !complete.is_empty() {
        for modality in [Modality::Gene, Modality::Wsi] {
            let pairs = inputs.execution.map(&complete, |&i| model.recovery_pair(&ds.records[i], modality));
            let (mut flow, mut zero) = (0.0, 0.0);
            for pair in pairs {
                let (recovered, truth) = pair?;
                flow += l2(&recovered, &truth);
                zero += l2(&vec![0.0; truth.len()], &truth);
            }
            let n = complete.len() as f64;
            recovery.push(RecoveryError { modality, n_records: complete.len(), flow_error: flow / n, zero_error: zero / n });
        }
    }

    let report = ImputeReport { n_records: indices.len(), complete_c_index, scenarios, recovery };
    write_json(&inputs.out_dir.join("impute_report.json"), &report)?;
    Ok(report)
}

/// CSV with header `variant,flops` and the low-rank/dense ratio.
pub fn flops(t: u64, d: u64, d_r: u64) -> (String, f64) {
    let dense = attention_flop_count(t, d, d_r, AttentionVariant::Dense);
    let low = attention_flop_count(t, d, d_r, AttentionVariant::LowRank);
    (format!("variant,flops\ndense,{dense}\nlow_rank,{low}\n"), low as f64 / dense as f64)
}

pub fn write_flops(dir: &Path, csv: &str) -> anyhow::Result<PathBuf> {
    let path = dir.join("flops.csv");
    write_text(&path, csv)?;
    Ok(path)
}
