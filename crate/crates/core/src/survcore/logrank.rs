use rand::seq::SliceRandom;
use serde::Serialize;

use super::{chi2_sf, SurvError, SurvivalLabel};
use crate::parallel::Execution;
use crate::rng::substream;

/// Two-group log-rank result; serializes as `{"chi2": .., "p": ..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogRank {
    pub chi2: f64,
    pub p: f64,
}

/// Log-rank chi-square statistic (one degree of freedom).
pub fn log_rank_statistic(group_a: &[SurvivalLabel], group_b: &[SurvivalLabel]) -> Result<f64, SurvError> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(SurvError::Empty("log_rank_test group"));
    }
    let mut obs: Vec<(f64, bool, bool)> = group_a
        .iter()
        .map(|l| (l.time(), l.event(), true))
        .chain(group_b.iter().map(|l| (l.time(), l.event(), false)))
        .collect();
    if !obs.iter().any(|o| o.1) {
        return Err(SurvError::Undefined("log-rank test with zero events"));
    }
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut n_a = group_a.len() as f64;
    let mut n = obs.len() as f64;
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let (mut d, mut d_a, mut leaving, mut leaving_a) = (0.0, 0.0, 0.0, 0.0);
        while i < obs.len() && obs[i].0 == t {
            let (_, event, in_a) = obs[i];
            if event {
                d += 1.0;
                if in_a {
                    d_a += 1.0;
                }
            }
            leaving += 1.0;
            if in_a {
                leaving_a += 1.0;
            }
            i += 1;
        }
        if d > 0.0 {
            o_minus_e += d_a - d * n_a / n;
            if n > 1.0 {
                var += d * (n_a / n) * (1.0 - n_a / n) * (n - d) / (n - 1.0);
            }
        }
        n -= leaving;
        n_a -= leaving_a;
    }
    Ok(if var > 0.0 { o_minus_e * o_minus_e / var } else { 0.0 })
}

/// Log-rank test with the asymptotic chi-square (1 df) p-value.
pub fn log_rank_test(group_a: &[SurvivalLabel], group_b: &[SurvivalLabel]) -> Result<LogRank, SurvError> {
    let chi2 = log_rank_statistic(group_a, group_b)?;
    Ok(LogRank { chi2, p: chi2_sf(chi2, 1.0) })
}

/// Permutation p-value for the log-rank statistic: the share of random
/// relabelings (group sizes fixed) whose statistic reaches the observed one,
/// with the usual `(hits + 1) / (resamples + 1)` correction.
pub fn permutation_p_value(
    group_a: &[SurvivalLabel],
    group_b: &[SurvivalLabel],
    resamples: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64, SurvError> {
    let observed = log_rank_statistic(group_a, group_b)?;
    let pooled: Vec<SurvivalLabel> = group_a.iter().chain(group_b).copied().collect();
    let n_a = group_a.len();
    const CHUNK: usize = 250;
    let chunks = resamples.div_ceil(CHUNK);
    let hits: Vec<usize> = exec.map_range(chunks, |c| {
        let mut rng = substream(seed, &format!("permutation/{c}"));
        let mut labels = pooled.clone();
        let count = CHUNK.min(resamples - c * CHUNK);
        (0..count)
            .filter(|_| {
                labels.shuffle(&mut rng);
                let stat = log_rank_statistic(&labels[..n_a], &labels[n_a..]).unwrap_or(0.0);
                stat >= observed - 1e-12
            })
            .count()
    });
    let hits: usize = hits.iter().sum();
    Ok((hits + 1) as f64 / (resamples + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(t: f64, delta: u8) -> SurvivalLabel {
        SurvivalLabel { y: 1, delta, t_cont: Some(t) }
    }

    #[test]
    fn identical_groups_give_zero_statistic() {
        let g: Vec<_> = [1.0, 2.0, 3.0, 4.0, 5.0].iter().map(|&t| l(t, 1)).collect();
        let r = log_rank_test(&g, &g).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn zero_events_is_undefined() {
        let g = [l(1.0, 0), l(2.0, 0)];
        assert!(matches!(log_rank_test(&g, &g), Err(SurvError::Undefined(_))));
        assert!(matches!(log_rank_test(&[], &g), Err(SurvError::Empty(_))));
    }

    #[test]
    fn textbook_two_group_example() {
        // Hand-worked: A events at 1, 3; B events at 2, 4, censoring at 5 in A.
        let a = [l(1.0, 1), l(3.0, 1), l(5.0, 0)];
        let b = [l(2.0, 1), l(4.0, 1)];
        // t=1: n=5, nA=3, E=0.6, V=0.24;  t=2: n=4, nA=2, E=0.5, V=0.25
        // t=3: n=3, nA=2, E=2/3, V=2/9;   t=4: n=2, nA=1, E=0.5, V=0.25
        let o_minus_e: f64 = 2.0 - (0.6 + 0.5 + 2.0 / 3.0 + 0.5);
        let var = 0.24 + 0.25 + 2.0 / 9.0 + 0.25;
        let r = log_rank_test(&a, &b).unwrap();
        assert!((r.chi2 - o_minus_e.powi(2) / var).abs() < 1e-12);
    }

    #[test]
    fn separated_groups_are_significant() {
        let a: Vec<_> = (0..20).map(|_| l(1.0, 1)).collect();
        let b: Vec<_> = (0..20).map(|_| l(10.0, 1)).collect();
        let r = log_rank_test(&a, &b).unwrap();
        assert!(r.p < 1e-3, "{r:?}");
        let perm = permutation_p_value(&a, &b, 2000, 1, Execution::Parallel).unwrap();
        assert!(perm < 1e-3, "{perm}");
    }

    #[test]
    fn permutation_is_execution_independent() {
        let a: Vec<_> = (0..12).map(|i| l(i as f64 + 0.5, (i % 3 != 0) as u8)).collect();
        let b: Vec<_> = (0..10).map(|i| l(i as f64 * 1.7 + 1.0, (i % 4 != 0) as u8)).collect();
        let p1 = permutation_p_value(&a, &b, 1000, 9, Execution::Sequential).unwrap();
        let p2 = permutation_p_value(&a, &b, 1000, 9, Execution::Parallel).unwrap();
        assert_eq!(p1, p2);
    }
}
