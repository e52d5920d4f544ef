use serde::Serialize;

use super::SurvivalLabel;

/// Right-continuous survival step curve starting at `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

impl StepCurve {
    /// Height at time `t`.
    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            1.0
        } else {
            self.survival[i - 1]
        }
    }

    /// CSV with header `time,survival`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,survival\n");
        for (t, s) in self.times.iter().zip(&self.survival) {
            out.push_str(&format!("{t},{s}\n"));
        }
        out
    }
}

/// Product-limit estimator over distinct event times. Records censored at an
/// event time are counted at risk for that step.
pub fn kaplan_meier(labels: &[SurvivalLabel]) -> StepCurve {
    let mut obs: Vec<(f64, bool)> = labels.iter().map(|l| (l.time(), l.event())).collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut curve = StepCurve { times: vec![0.0], survival: vec![1.0] };
    let mut at_risk = obs.len();
    let mut s = 1.0;
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut j = i;
        let mut deaths = 0;
        while j < obs.len() && obs[j].0 == t {
            deaths += usize::from(obs[j].1);
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            curve.times.push(t);
            curve.survival.push(s);
        }
        at_risk -= j - i;
        i = j;
    }
    curve
}
