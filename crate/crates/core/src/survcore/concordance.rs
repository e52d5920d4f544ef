use serde::Serialize;

use super::{SurvError, SurvivalLabel};

/// Harrell's concordance with its pair accounting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Concordance {
    pub c_index: f64,
    /// Pairs `(i, j)` with `t_i < t_j` and an observed event for `i`.
    pub admissible_pairs: u64,
    /// Twice the credit: 2 per concordant pair, 1 per risk tie.
    pub half_credits: u64,
}

/// Harrell's C-index. Pairs are ordered by [`SurvivalLabel::time`]; tied
/// times are not comparable and tied risks earn half credit.
///
/// Runs in `O(n log n)` with a Fenwick tree over risk ranks.
pub fn concordance_index(risks: &[f64], labels: &[SurvivalLabel]) -> Result<Concordance, SurvError> {
    if risks.len() != labels.len() {
        return Err(SurvError::LengthMismatch(risks.len(), labels.len()));
    }
    if risks.iter().any(|r| r.is_nan()) {
        return Err(SurvError::InvalidHazard("NaN risk score".into()));
    }
    let n = risks.len();

    let mut sorted_risks: Vec<f64> = risks.to_vec();
    sorted_risks.sort_by(f64::total_cmp);
    sorted_risks.dedup();
    let rank = |r: f64| sorted_risks.partition_point(|&v| v < r);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| labels[b].time().total_cmp(&labels[a].time()));

    let mut tree = Fenwick::new(sorted_risks.len());
    let mut inserted: u64 = 0;
    let mut pairs: u64 = 0;
    let mut half: u64 = 0;
    let mut start = 0;
    while start < n {
        let t = labels[order[start]].time();
        let mut end = start;
        while end < n && labels[order[end]].time() == t {
            end += 1;
        }
        // Everything already inserted has a strictly later time.
        for &i in &order[start..end] {
            if !labels[i].event() {
                continue;
            }
            let r = rank(risks[i]);
            let lower = tree.prefix(r);
            let equal = tree.prefix(r + 1) - lower;
            pairs += inserted;
            half += 2 * lower + equal;
        }
        for &i in &order[start..end] {
            tree.add(rank(risks[i]));
            inserted += 1;
        }
        start = end;
    }
    if pairs == 0 {
        return Err(SurvError::Undefined("no admissible pairs for the concordance index"));
    }
    Ok(Concordance { c_index: half as f64 / (2 * pairs) as f64, admissible_pairs: pairs, half_credits: half })
}

struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}
