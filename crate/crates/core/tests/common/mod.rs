#![allow(dead_code)]

use flowsurv::diffcore::{Adam, ParamStore, Tape, Tensor};
use flowsurv::flowcore::{cdt_loss_tape, flow_forward, flow_forward_rows, ClassPrior, FlowModel};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_rows(rng: &mut ChaCha8Rng, rows: usize, mean: &[f64], std: f64) -> Tensor {
    let d = mean.len();
    let values = (0..rows * d).map(|i| mean[i % d] + std * rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::matrix(rows, d, values)
}

/// Full-batch Adam on the summed cdt loss of `(rows, class)` groups. The prior
/// is held fixed unless `train_prior`. Calls `after_step` with the step index.
pub fn train_cdt(
    store: &mut ParamStore,
    flow: &FlowModel,
    prior: &ClassPrior,
    groups: &[(Tensor, usize)],
    steps: usize,
    lr: f64,
    train_prior: bool,
    mut after_step: impl FnMut(usize, &ParamStore),
) {
    let mut adam = Adam::new(store, lr);
    let n: usize = groups.iter().map(|(x, _)| x.rows()).sum();
    for step in 0..steps {
        let tape = Tape::new();
        let losses: Vec<_> = groups
            .iter()
            .map(|(x, c)| cdt_loss_tape(&tape, store, tape.constant(x.clone()), *c, flow, prior))
            .collect();
        let loss = tape.scale(tape.add_all(&losses), 1.0 / n as f64);
        let grads = tape.backward(loss, store).unwrap();
        let frozen = (store.get(prior.means).clone(), store.get(prior.log_vars).clone());
        adam.step(store, &grads);
        if !train_prior {
            *store.get_mut(prior.means) = frozen.0;
            *store.get_mut(prior.log_vars) = frozen.1;
        }
        after_step(step, store);
    }
}

/// log |det J| of the flow at `x` from a central-difference Jacobian.
pub fn numeric_logdet(flow: &FlowModel, store: &ParamStore, x: &[f64], h: f64) -> f64 {
    let d = x.len();
    let mut jac = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[j] += h;
        down[j] -= h;
        let (zu, _) = flow_forward(&up, None, flow, store).unwrap();
        let (zd, _) = flow_forward(&down, None, flow, store).unwrap();
        for i in 0..d {
            jac[(i, j)] = (zu[i] - zd[i]) / (2.0 * h);
        }
    }
    jac.determinant().abs().ln()
}

/// Midpoint-rule integral of the flow density `p(x) = N(f(x); class) |det J|`
/// over `[-half, half]^2` with `n` cells per axis.
pub fn density_mass_2d(flow: &FlowModel, prior: &ClassPrior, store: &ParamStore, class: usize, half: f64, n: usize) -> f64 {
    let cell = 2.0 * half / n as f64;
    let mu = prior.mean(store, class);
    let log_var = store.get(prior.log_vars).row_slice(class - 1).to_vec();
    let mut mass = 0.0;
    for i in 0..n {
        let x0 = -half + (i as f64 + 0.5) * cell;
        let row: Vec<f64> = (0..n).flat_map(|j| [x0, -half + (j as f64 + 0.5) * cell]).collect();
        let (z, logdet) = flow_forward_rows(&Tensor::matrix(n, 2, row), flow, store);
        for (r, ld) in logdet.iter().enumerate() {
            let mut logp = -std::f64::consts::LN_2 - std::f64::consts::PI.ln();
            for k in 0..2 {
                let diff = z.get(r, k) - mu[k];
                logp -= 0.5 * (log_var[k] + diff * diff / log_var[k].exp());
            }
            mass += (logp + ld).exp();
        }
    }
    mass * cell * cell
}

pub fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

use flowsurv::survcore::SurvivalLabel;
use rand::seq::SliceRandom;

/// Kaplan-Meier heights at `times` by redistribute-to-the-right: every record
/// starts with mass 1/n and a censored record hands its mass in equal parts
/// to everything after it (events before censorings at tied times).
pub fn km_by_redistribution(labels: &[SurvivalLabel], times: &[f64]) -> Vec<f64> {
    let mut obs: Vec<(f64, bool)> = labels.iter().map(|l| (l.time(), l.event())).collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let n = obs.len();
    let mut mass = vec![1.0 / n as f64; n];
    for i in 0..n {
        if !obs[i].1 && i + 1 < n {
            let share = mass[i] / (n - i - 1) as f64;
            for m in &mut mass[i + 1..] {
                *m += share;
            }
            mass[i] = 0.0;
        }
    }
    times
        .iter()
        .map(|&t| 1.0 - obs.iter().zip(&mass).filter(|((ti, ev), _)| *ev && *ti <= t).map(|(_, m)| m).sum::<f64>())
        .collect()
}

/// Log-rank chi-square from per-time hypergeometric moments.
pub fn log_rank_oracle(a: &[SurvivalLabel], b: &[SurvivalLabel]) -> f64 {
    let mut times: Vec<f64> = a.iter().chain(b).filter(|l| l.event()).map(|l| l.time()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    for t in times {
        let at_risk = |g: &[SurvivalLabel]| g.iter().filter(|l| l.time() >= t).count() as f64;
        let deaths = |g: &[SurvivalLabel]| g.iter().filter(|l| l.event() && l.time() == t).count() as f64;
        let (na, nb, da, db) = (at_risk(a), at_risk(b), deaths(a), deaths(b));
        let (n, d) = (na + nb, da + db);
        o_minus_e += da - d * na / n;
        if n > 1.0 {
            var += d * (na / n) * (nb / n) * (n - d) / (n - 1.0);
        }
    }
    o_minus_e * o_minus_e / var
}

/// Share of label permutations whose statistic reaches the observed one.
pub fn permutation_oracle(a: &[SurvivalLabel], b: &[SurvivalLabel], resamples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let observed = log_rank_oracle(a, b);
    let mut pooled: Vec<SurvivalLabel> = a.iter().chain(b).copied().collect();
    let mut hits = 0;
    for _ in 0..resamples {
        pooled.shuffle(rng);
        if log_rank_oracle(&pooled[..a.len()], &pooled[a.len()..]) >= observed - 1e-12 {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (resamples + 1) as f64
}

/// Harrell's C by enumerating every ordered pair.
pub fn brute_force_c_index(risks: &[f64], labels: &[SurvivalLabel]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..risks.len() {
        for j in 0..risks.len() {
            if labels[i].event() && labels[i].time() < labels[j].time() {
                den += 1.0;
                if risks[i] > risks[j] {
                    num += 1.0;
                } else if risks[i] == risks[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Random labels with continuous times, ties and mixed censoring, plus risks
/// drawn from a small grid so that risk ties occur.
pub fn random_survival_set(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<SurvivalLabel>) {
    let labels = (0..n)
        .map(|_| {
            let t = (rng.random::<f64>() * 20.0).round() / 2.0;
            SurvivalLabel { y: 1, delta: u8::from(rng.random::<f64>() < 0.6), t_cont: Some(t) }
        })
        .collect();
    let risks = (0..n).map(|_| (rng.random::<f64>() * 30.0).round()).collect();
    (risks, labels)
}

/// Exponential times with hazard `rate` and uniform censoring on `[0, c_max]`.
pub fn exponential_group(rng: &mut ChaCha8Rng, n: usize, rate: f64, c_max: f64) -> Vec<SurvivalLabel> {
    (0..n)
        .map(|_| {
            let t = -rng.random::<f64>().ln() / rate;
            let c = rng.random::<f64>() * c_max;
            SurvivalLabel { y: 1, delta: u8::from(t <= c), t_cont: Some(t.min(c)) }
        })
        .collect()
}
