use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, Imputation, LossBreakdown, Model, ModelConfig, ModelError, PatientRecord, Scenario};
use crate::data::Modality;
use crate::diffcore::{Adam, DiffError, Gradients, ParamStore};
use crate::parallel::Execution;
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-record total loss over the epoch.
    pub train_loss: f64,
    /// Mean per-record components.
    pub components: LossBreakdown,
    pub val_c_index: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch (last epoch without validation).
    pub model: Model,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mean gradient and mean loss components over a batch. Per-record work runs
/// through `exec`; the reduction is always in batch order.
pub fn batch_gradients(
    model: &Model,
    records: &[PatientRecord],
    batch: &[(usize, Option<Modality>)],
    exec: Execution,
) -> Result<(Gradients, LossBreakdown), ModelError> {
    let results = exec.map(batch, |&(i, hide)| {
        let r = &records[i];
        let mut avail = r.availability();
        match hide {
            Some(Modality::Wsi) if avail.is_complete() => avail.wsi = false,
            Some(Modality::Gene) if avail.is_complete() => avail.gene = false,
            _ => {}
        }
        model.net.record_gradients(&model.store, r, avail)
    });
    let mut grads = model.store.zero_gradients();
    let mut losses = LossBreakdown::default();
    for res in results {
        let (g, l) = res?;
        grads.accumulate(&g);
        losses.add(&l);
    }
    let f = 1.0 / batch.len() as f64;
    grads.scale(f);
    losses.scale(f);
    Ok((grads, losses))
}

fn with_epoch(e: ModelError, epoch: usize) -> ModelError {
    match e {
        ModelError::Numerical { term, detail, .. } => ModelError::Numerical { epoch, term, detail },
        ModelError::Diff(DiffError::NonFinite { op, node }) => ModelError::Numerical {
            epoch,
            term: "gradient".into(),
            detail: format!("backward pass produced a non-finite value in `{op}` (node {node})"),
        },
        other => other,
    }
}

/// Mini-batch Adam on `train_idx`, early-stopped on the C-index of `val_idx`.
///
/// With probability `curriculum_rate` a batch hides one modality (chosen
/// uniformly) of its complete records, so the recovery path feeds the
/// survival head during training.
pub fn train(
    records: &[PatientRecord],
    train_idx: &[usize],
    val_idx: &[usize],
    d_w: usize,
    d_g: usize,
    config: &ModelConfig,
    exec: Execution,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if train_idx.is_empty() {
        return Err(ModelError::Contract("empty training set".into()));
    }
    let mut model = Model::new(config, d_w, d_g)?;
    let mut adam = Adam::new(&model.store, config.learning_rate);
    let mut order = train_idx.to_vec();
    let mut batch_rng = substream(config.seed, "batching");
    let mut curriculum_rng = substream(config.seed, "curriculum");

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut batch_rng);
        let mut epoch_losses = LossBreakdown::default();
        for chunk in order.chunks(config.batch_size) {
            let hide = if curriculum_rng.random::<f64>() < config.curriculum_rate {
                Some(if curriculum_rng.random::<bool>() { Modality::Gene } else { Modality::Wsi })
            } else {
                None
            };
            let batch: Vec<(usize, Option<Modality>)> = chunk.iter().map(|&i| (i, hide)).collect();
            let (mut grads, losses) = batch_gradients(&model, records, &batch, exec).map_err(|e| with_epoch(e, epoch))?;
            if !grads.all_finite() {
                return Err(ModelError::Numerical {
                    epoch,
                    term: "gradient".into(),
                    detail: "non-finite batch gradient".into(),
                });
            }
            if config.grad_clip > 0.0 {
                grads.clip_global_norm(config.grad_clip);
            }
            adam.step(&mut model.store, &grads);
            let mut weighted = losses;
            weighted.scale(chunk.len() as f64);
            epoch_losses.add(&weighted);
        }
        epoch_losses.scale(1.0 / order.len() as f64);

        let val_c_index = if val_idx.is_empty() {
            None
        } else {
            evaluate(&model, records, val_idx, None, Scenario::Complete, Imputation::Flow, exec)?.c_index
        };
        history.push(EpochMetrics { epoch, train_loss: epoch_losses.total, components: epoch_losses, val_c_index });

        if val_idx.is_empty() {
            continue;
        }
        let score = val_c_index.unwrap_or(f64::NEG_INFINITY);
        match &best {
            Some((b, _, _)) if score <= *b => {
                since_best += 1;
                if since_best >= config.patience {
                    stopped_early = epoch < config.epochs;
                    break;
                }
            }
            _ => {
                best = Some((score, epoch, model.store.clone()));
                since_best = 0;
            }
        }
    }

    let best_epoch = match best {
        Some((_, epoch, store)) => {
            model.store = store;
            epoch
        }
        None => history.len(),
    };
    Ok(TrainOutcome { model, history, best_epoch, stopped_early })
}

/// Splits `pool` into (train, validation), holding out `fraction` of the
/// events and of the censored records separately.
pub fn inner_split(records: &[PatientRecord], pool: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = substream(seed, "inner-split");
    let mut train = Vec::new();
    let mut val = Vec::new();
    for event in [true, false] {
        let mut group: Vec<usize> = pool.iter().copied().filter(|&i| records[i].label.event() == event).collect();
        group.shuffle(&mut rng);
        let k = (fraction * group.len() as f64).round() as usize;
        val.extend_from_slice(&group[..k]);
        train.extend_from_slice(&group[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}
