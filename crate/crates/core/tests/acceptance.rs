//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::{
    brute_force_c_index, density_mass_2d, exponential_group, gaussian_rows, numeric_logdet, permutation_oracle,
    random_survival_set, train_cdt,
};
use flowsurv::data::{generate, write_dataset, Dataset, GeneratorConfig};
use flowsurv::diffcore::{check_gradients, ParamStore, Tensor, Var};
use flowsurv::flowcore::{flow_forward, flow_forward_rows, flow_inverse_rows, init_class_prior, FlowModel, FlowSpec};
use flowsurv::lrattn::{
    attention_flop_count, dense_attention, low_rank_attention, AttentionVariant, LowRankAttentionParams,
};
use flowsurv::model::{
    cross_validate, evaluate, predict_risks, train, FoldRun, ForwardPass, Imputation, Model, ModelConfig, Scenario,
};
use flowsurv::parallel::Execution;
use flowsurv::survcore::{concordance_index, log_rank_test, SurvivalLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const EXEC: Execution = Execution::Parallel;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn randn(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect())
}

fn flow_round_trip() -> Verdict {
    let start = Instant::now();
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let flow = FlowModel::new(&mut store, "x", FlowSpec { dim: 16, layers: 4, hidden: 16, cond_dim: 0 }, &mut rng).unwrap();
    let prior = init_class_prior(&mut store, 1, 16).unwrap();
    let probe = gaussian_rows(&mut rng, 1000, &[0.0; 16], 2.0);
    let err = |s: &ParamStore| {
        let (z, _) = flow_forward_rows(&probe, &flow, s);
        flow_inverse_rows(&z, &flow, s).max_abs_diff(&probe)
    };
    let before = err(&store);
    let mean: Vec<f64> = (0..16).map(|i| (i as f64 - 7.5) / 4.0).collect();
    let data = gaussian_rows(&mut rng, 256, &mean, 0.5);
    train_cdt(&mut store, &flow, &prior, &[(data, 1)], 200, 0.01, true, |_, _| {});
    let after = err(&store);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        before <= 1e-9 && after <= 1e-9 && secs < 10.0,
        format!("max |f^-1(f(x)) - x| = {before:.2e} before, {after:.2e} after 200 steps ({secs:.1} s)"),
    )
}

fn exact_likelihood() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut store = ParamStore::new();
    let flow = FlowModel::new(&mut store, "x", FlowSpec { dim: 4, layers: 4, hidden: 16, cond_dim: 0 }, &mut rng).unwrap();
    let prior = init_class_prior(&mut store, 1, 4).unwrap();
    let data = gaussian_rows(&mut rng, 200, &[1.0, -2.0, 0.5, 3.0], 0.7);
    train_cdt(&mut store, &flow, &prior, &[(data, 1)], 100, 0.02, true, |_, _| {});
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, logdet) = flow_forward(&x, None, &flow, &store).unwrap();
        let numeric = numeric_logdet(&flow, &store, &x, 1e-5);
        worst = worst.max((logdet - numeric).abs() / logdet.abs().max(1e-6));
    }

    let mut store2 = ParamStore::new();
    let flow2 = FlowModel::new(&mut store2, "x", FlowSpec { dim: 2, layers: 4, hidden: 16, cond_dim: 0 }, &mut rng).unwrap();
    let prior2 = init_class_prior(&mut store2, 1, 2).unwrap();
    let data2 = gaussian_rows(&mut rng, 300, &[0.5, -0.5], 1.0);
    train_cdt(&mut store2, &flow2, &prior2, &[(data2, 1)], 150, 0.02, true, |_, _| {});
    let mass = density_mass_2d(&flow2, &prior2, &store2, 1, 6.0, 600);
    verdict(
        worst <= 1e-5 && (mass - 1.0).abs() <= 1e-3,
        format!("d=4 log-det rel err {worst:.2e}; d=2 density mass {mass:.6}"),
    )
}

fn gradient_fidelity() -> Verdict {
    let data = generate(&GeneratorConfig { d_w: 6, d_g: 5, bag_min: 2, bag_max: 4, folds: 2, ..GeneratorConfig::new(8, 1.5, 21) })
        .unwrap();
    let config = ModelConfig {
        d: 8,
        d_r: 4,
        flow_layers: 2,
        flow_hidden: 6,
        encoder_hidden: 10,
        pool_hidden: 4,
        decoder_hidden: 6,
        ffn_hidden: 12,
        seed: 5,
        ..ModelConfig::default()
    };
    let mut model = Model::new(&config, 6, 5).unwrap();
    // Move every zero-initialised block off its identity point.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        for v in model.store.get_mut(id).values_mut() {
            *v += 0.2 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let pair = [&data.records[0], &data.records[1]];
    let net = model.net.clone();
    let component = |pick: fn(&ForwardPass) -> Var| {
        let net = net.clone();
        check_gradients(&model.store, 1e-5, move |t, s| {
            let parts: Vec<Var> = pair
                .iter()
                .map(|r| pick(&net.forward(t, s, r, r.availability(), Imputation::Flow, true).unwrap()))
                .collect();
            t.scale(t.add_all(&parts), 0.5)
        })
        .unwrap()
        .max_rel_error
    };
    let errors = [
        ("L_surv", component(|p| p.surv)),
        ("L_recon", component(|p| p.recon.unwrap())),
        ("L_align", component(|p| p.align.unwrap())),
        ("L_cdt", component(|p| p.cdt.unwrap())),
        ("total", component(|p| p.total)),
    ];
    let pass = errors.iter().all(|(name, e)| if *name == "total" { *e <= 1e-3 } else { *e <= 1e-4 });
    let detail = errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    verdict(pass, format!("max relative error: {detail}"))
}

/// Per-pair evaluation of low-rank attention without matrix products.
fn naive_low_rank_attention(x: &Tensor, p: &LowRankAttentionParams) -> Tensor {
    let (t, d, r) = (x.rows(), p.d(), p.rank());
    let project = |i: usize, w: &Tensor, u: &Tensor| -> Vec<f64> {
        (0..r)
            .map(|a| (0..d).map(|m| (0..d).map(|n| x.get(i, n) * w.get(n, m)).sum::<f64>() * u.get(m, a)).sum())
            .collect()
    };
    let mut out = Tensor::zeros(&[t, r]);
    for i in 0..t {
        let q = project(i, &p.w_q, &p.u);
        let scores: Vec<f64> = (0..t)
            .map(|j| {
                let k = project(j, &p.w_k, &p.u);
                let mut s = 0.0;
                for a in 0..r {
                    for b in 0..r {
                        s += q[a] * p.a.get(a, b) * k[b];
                    }
                }
                s / (r as f64).sqrt()
            })
            .collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
        for j in 0..t {
            let w = (scores[j] - top).exp() / z;
            let v = project(j, &p.w_v, &p.u_v);
            for a in 0..r {
                out.set(i, a, out.get(i, a) + w * v[a]);
            }
        }
    }
    out
}

fn attention_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let d = 12;
    let x = randn(&mut rng, 9, d);
    let (w_q, w_k, w_v) = (randn(&mut rng, d, d), randn(&mut rng, d, d), randn(&mut rng, d, d));
    let identity =
        LowRankAttentionParams::new(w_q.clone(), w_k.clone(), w_v.clone(), Tensor::identity(d), Tensor::identity(d), Tensor::identity(d))
            .unwrap();
    let dense = dense_attention(&x, &w_q, &w_k, &w_v).unwrap();
    let low = low_rank_attention(&x, &identity).unwrap();
    let identity_diff = low.output.max_abs_diff(&dense.output).max(low.weights.max_abs_diff(&dense.weights));

    let mut oracle_diff: f64 = 0.0;
    for d_r in [1, 3, 6] {
        let params = LowRankAttentionParams::random(d, d_r, &mut rng).unwrap();
        let fast = low_rank_attention(&x, &params).unwrap().output;
        oracle_diff = oracle_diff.max(fast.max_abs_diff(&naive_low_rank_attention(&x, &params)));
    }
    verdict(
        identity_diff <= 1e-10 && oracle_diff <= 1e-10,
        format!("identity vs dense {identity_diff:.1e}; random factors vs per-pair oracle {oracle_diff:.1e}"),
    )
}

fn flop_ratio() -> Verdict {
    let dense = attention_flop_count(256, 64, 16, AttentionVariant::Dense);
    let low = attention_flop_count(256, 64, 16, AttentionVariant::LowRank);
    let ratio = low as f64 / dense as f64;
    verdict(ratio <= 0.40, format!("T=256 d=64 d_r=16: low-rank {low} / dense {dense} = {ratio:.4}"))
}

fn c_index_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut mismatches = 0;
    let mut sizes = Vec::new();
    for _ in 0..50 {
        let n = rng.random_range(2..=200);
        sizes.push(n);
        let (risks, labels) = random_survival_set(&mut rng, n);
        let fast = concordance_index(&risks, &labels).ok().map(|c| c.c_index);
        if fast != brute_force_c_index(&risks, &labels) {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{mismatches} mismatches over 50 datasets (n from {} to {})", sizes.iter().min().unwrap(), sizes.iter().max().unwrap()),
    )
}

/// The configuration behind the synthetic benchmark criteria.
fn benchmark_config() -> ModelConfig {
    ModelConfig { d: 16, d_r: 4, batch_size: 16, learning_rate: 0.003, epochs: 10, ..ModelConfig::default() }
}

struct Benchmark {
    data: Dataset,
    runs: Vec<FoldRun>,
    seconds: f64,
}

impl Benchmark {
    fn run(beta: f64, config: &ModelConfig) -> Self {
        let start = Instant::now();
        let data = generate(&GeneratorConfig::new(2000, beta, 7)).unwrap();
        let folds: Vec<usize> = (0..data.header.num_folds).collect();
        let runs = cross_validate(&data, config, &folds, EXEC).unwrap();
        let mut bench = Self { data, runs, seconds: 0.0 };
        bench.mean_c(Scenario::Complete, Imputation::Flow);
        bench.seconds = start.elapsed().as_secs_f64();
        bench
    }

    fn fold_c(&self, scenario: Scenario, imputation: Imputation) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| {
                evaluate(&r.outcome.model, &self.data.records, &r.test_idx, Some(r.fold), scenario, imputation, EXEC)
                    .unwrap()
                    .c_index
                    .unwrap_or(f64::NAN)
            })
            .collect()
    }

    fn mean_c(&self, scenario: Scenario, imputation: Imputation) -> f64 {
        let c = self.fold_c(scenario, imputation);
        c.iter().sum::<f64>() / c.len() as f64
    }

    /// Out-of-fold complete-scenario risks split at the median.
    fn median_split(&self) -> (Vec<SurvivalLabel>, Vec<SurvivalLabel>) {
        let mut scored: Vec<(f64, SurvivalLabel)> = Vec::new();
        for r in &self.runs {
            let risks = predict_risks(&r.outcome.model, &self.data.records, &r.test_idx, Scenario::Complete, Imputation::Flow, EXEC)
                .unwrap();
            scored.extend(r.test_idx.iter().zip(risks).map(|(&i, risk)| (risk, self.data.records[i].label)));
        }
        let mut sorted: Vec<f64> = scored.iter().map(|s| s.0).collect();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let high = scored.iter().filter(|s| s.0 >= median).map(|s| s.1).collect();
        let low = scored.iter().filter(|s| s.0 < median).map(|s| s.1).collect();
        (high, low)
    }
}

fn signal_recovery(signal: &Benchmark, null: &Benchmark) -> Verdict {
    let c = signal.mean_c(Scenario::Complete, Imputation::Flow);
    let c0 = null.mean_c(Scenario::Complete, Imputation::Flow);
    let secs = signal.seconds + null.seconds;
    verdict(
        c >= 0.75 && (0.45..=0.55).contains(&c0) && secs < 300.0,
        format!("beta=1.5 mean C {c:.4}; beta=0 mean C {c0:.4}; {secs:.0} s for both 5-fold runs"),
    )
}

fn missing_modality(signal: &Benchmark) -> Verdict {
    let flow = signal.mean_c(Scenario::MissingGene, Imputation::Flow);
    let zero = signal.mean_c(Scenario::MissingGene, Imputation::Zero);
    let wsi_flow = signal.mean_c(Scenario::MissingWsi, Imputation::Flow);
    let wsi_zero = signal.mean_c(Scenario::MissingWsi, Imputation::Zero);
    verdict(
        flow - zero >= 0.02,
        format!(
            "missing_gene mean C: flow {flow:.4}, zero imputation {zero:.4}, gap {:.4} (missing_wsi: flow {wsi_flow:.4}, zero {wsi_zero:.4})",
            flow - zero
        ),
    )
}

fn stratification(signal: &Benchmark) -> Verdict {
    let (high, low) = signal.median_split();
    let split = log_rank_test(&high, &low).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let a = exponential_group(&mut rng, 40, 1.0, 3.0);
    let b = exponential_group(&mut rng, 40, 0.4, 3.0);
    let small = log_rank_test(&a, &b).unwrap();
    let oracle = permutation_oracle(&a, &b, 10_000, &mut ChaCha8Rng::seed_from_u64(52));
    verdict(
        split.p < 0.01 && (small.p - oracle).abs() <= 0.01,
        format!(
            "median split of held-out risks: chi2 {:.2}, p {:.2e}; small set p {:.4} vs 10k-permutation {oracle:.4}",
            split.chi2, split.p, small.p
        ),
    )
}

fn ablation(signal: &Benchmark, no_align: &Benchmark) -> Verdict {
    let full = signal.mean_c(Scenario::MissingGene, Imputation::Flow);
    let zero = signal.mean_c(Scenario::MissingGene, Imputation::Zero);
    let unaligned = no_align.mean_c(Scenario::MissingGene, Imputation::Flow);
    verdict(
        zero < full && unaligned < full,
        format!("missing_gene mean C: full {full:.4}, zero imputation {zero:.4}, lambda_align=0 {unaligned:.4}"),
    )
}

/// Generation bytes, epoch-1 loss and the final report of one small pipeline run.
fn pipeline_fingerprint() -> (Vec<u8>, u64, String) {
    let data = generate(&GeneratorConfig::new(120, 1.5, 99)).unwrap();
    let mut bytes = Vec::new();
    write_dataset(&data, &mut bytes).unwrap();
    let config = ModelConfig { d: 8, d_r: 4, epochs: 3, batch_size: 8, seed: 99, ..ModelConfig::default() };
    let train_idx = data.train_indices(0);
    let test_idx = data.fold_indices(0);
    let out = train(&data.records, &train_idx, &[], 16, 16, &config, EXEC).unwrap();
    let report = evaluate(&out.model, &data.records, &test_idx, Some(0), Scenario::MissingGene, Imputation::Flow, EXEC).unwrap();
    (bytes, out.history[0].train_loss.to_bits(), serde_json::to_string(&report).unwrap())
}

fn determinism() -> Verdict {
    let a = pipeline_fingerprint();
    let b = pipeline_fingerprint();
    verdict(
        a.0 == b.0 && a.1 == b.1 && a.2 == b.2,
        format!(
            "dataset bytes equal: {}, epoch-1 loss equal: {} ({}), report equal: {}",
            a.0 == b.0,
            a.1 == b.1,
            f64::from_bits(a.1),
            a.2 == b.2
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, v: Verdict| {
        let status = if v.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!v.pass);
        println!("criterion {n:>2} {status} {name}: {}", v.detail);
    };
    report(1, "flow round trip", flow_round_trip());
    report(2, "exact likelihood", exact_likelihood());
    report(3, "gradient fidelity", gradient_fidelity());
    report(4, "low-rank attention equivalence", attention_equivalence());
    report(5, "attention FLOP ratio", flop_ratio());
    report(6, "C-index oracle", c_index_oracle());

    let config = benchmark_config();
    let signal = Benchmark::run(1.5, &config);
    let null = Benchmark::run(0.0, &config);
    report(7, "signal recovery", signal_recovery(&signal, &null));
    report(8, "missing-modality robustness", missing_modality(&signal));
    report(9, "stratification", stratification(&signal));
    let no_align = Benchmark::run(1.5, &ModelConfig { lambda_align: 0.0, ..config });
    report(10, "ablation direction", ablation(&signal, &no_align));
    report(11, "determinism", determinism());

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
