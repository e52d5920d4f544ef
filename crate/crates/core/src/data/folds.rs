use rand::seq::SliceRandom;

use super::DataError;
use crate::rng::substream;
use crate::survcore::SurvivalLabel;

/// Assigns each record to one of `k` folds so that fold sizes differ by at
/// most one and so do the per-fold counts of censored records.
///
/// Events and censored records are shuffled separately, then dealt round-robin
/// (events first, continuing the same cycle for censored records).
pub fn stratified_folds(labels: &[SurvivalLabel], k: usize, seed: u64) -> Result<Vec<usize>, DataError> {
    if k < 2 {
        return Err(DataError::Contract(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(DataError::Contract(format!("{} records cannot fill {k} folds", labels.len())));
    }
    let mut rng = substream(seed, "folds");
    let mut events: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].event()).collect();
    let mut censored: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].event()).collect();
    events.shuffle(&mut rng);
    censored.shuffle(&mut rng);
    let mut folds = vec![0; labels.len()];
    for (slot, &i) in events.iter().chain(&censored).enumerate() {
        folds[i] = slot % k;
    }
    Ok(folds)
}

/// Censored fraction of each fold.
pub fn fold_censoring_fractions(labels: &[SurvivalLabel], folds: &[usize], k: usize) -> Vec<f64> {
    let mut total = vec![0usize; k];
    let mut censored = vec![0usize; k];
    for (l, &f) in labels.iter().zip(folds) {
        total[f] += 1;
        censored[f] += usize::from(!l.event());
    }
    total.iter().zip(&censored).map(|(&t, &c)| if t == 0 { 0.0 } else { c as f64 / t as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn labels(events: &[bool]) -> Vec<SurvivalLabel> {
        events.iter().map(|&e| SurvivalLabel::new(1, u8::from(e), None).unwrap()).collect()
    }

    fn sizes(folds: &[usize], k: usize) -> Vec<usize> {
        (0..k).map(|f| folds.iter().filter(|&&x| x == f).count()).collect()
    }

    #[test]
    fn all_events_split_evenly() {
        let folds = stratified_folds(&labels(&[true; 10]), 5, 1).unwrap();
        assert_eq!(sizes(&folds, 5), vec![2; 5]);
    }

    #[test]
    fn all_censored_is_valid() {
        let l = labels(&[false; 23]);
        let folds = stratified_folds(&l, 4, 1).unwrap();
        let s = sizes(&folds, 4);
        assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        assert!(fold_censoring_fractions(&l, &folds, 4).iter().all(|&f| f == 1.0));
    }

    #[test]
    fn thirty_percent_censored_thousand_records() {
        let events: Vec<bool> = (0..1000).map(|i| i % 10 >= 3).collect();
        let l = labels(&events);
        let folds = stratified_folds(&l, 5, 7).unwrap();
        for f in fold_censoring_fractions(&l, &folds, 5) {
            assert!((0.25..=0.35).contains(&f), "{f}");
        }
    }

    #[test]
    fn too_few_records_rejected() {
        assert!(stratified_folds(&labels(&[true; 3]), 5, 1).is_err());
        assert!(stratified_folds(&labels(&[true; 3]), 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn folds_are_balanced(events in prop::collection::vec(any::<bool>(), 200..600), k in 2usize..8, seed in 0u64..100) {
            let l = labels(&events);
            let folds = stratified_folds(&l, k, seed).unwrap();
            let s = sizes(&folds, k);
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            let global = events.iter().filter(|&&e| !e).count() as f64 / events.len() as f64;
            for f in fold_censoring_fractions(&l, &folds, k) {
                prop_assert!((f - global).abs() <= 0.05);
            }
        }
    }
}
