use super::{inner_split, train, ModelConfig, ModelError, TrainOutcome};
use crate::data::Dataset;
use crate::parallel::Execution;

/// One cross-validation fold: the held-out test fold, the early-stopping
/// split carved from the remaining folds, and the trained model.
#[derive(Clone, Debug)]
pub struct FoldRun {
    pub fold: usize,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub outcome: TrainOutcome,
}

pub fn train_fold(dataset: &Dataset, fold: usize, config: &ModelConfig, exec: Execution) -> Result<FoldRun, ModelError> {
    let (d_w, d_g) = match (dataset.header.d_w, dataset.header.d_g) {
        (Some(w), Some(g)) => (w, g),
        _ => return Err(ModelError::Contract("training needs records carrying both modalities".into())),
    };
    if fold >= dataset.header.num_folds {
        return Err(ModelError::Contract(format!("fold {fold} outside 0..{}", dataset.header.num_folds)));
    }
    let test_idx = dataset.fold_indices(fold);
    let pool = dataset.train_indices(fold);
    let (train_idx, val_idx) = inner_split(&dataset.records, &pool, config.validation_fraction, config.seed);
    let outcome = train(&dataset.records, &train_idx, &val_idx, d_w, d_g, config, exec)?;
    Ok(FoldRun { fold, train_idx, val_idx, test_idx, outcome })
}

/// Trains every listed fold. Folds run through `exec` (each with its own
/// optimizer state); results come back in fold order.
pub fn cross_validate(
    dataset: &Dataset,
    config: &ModelConfig,
    folds: &[usize],
    exec: Execution,
) -> Result<Vec<FoldRun>, ModelError> {
    exec.map(folds, |&f| train_fold(dataset, f, config, exec)).into_iter().collect()
}
