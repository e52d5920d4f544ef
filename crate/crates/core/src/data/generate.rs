use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{stratified_folds, DataError, Dataset, DatasetHeader, GeneratorConfig};
use crate::diffcore::Tensor;
use crate::model::PatientRecord;
use crate::rng::substream;
use crate::survcore::{concordance_index, Concordance, SurvError, SurvivalLabel};

/// Largest accepted gap between the target and realized censoring fraction.
const CENSORING_SLACK: f64 = 0.05;

fn normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let v = normal_vec(rng, n);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Quantile class (1-based) of each value among all values.
fn quantile_classes(values: &[f64], classes: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut class = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        class[i] = rank * classes / n + 1;
    }
    class
}

/// Scale `u` of the censoring times `u * uniform` whose censored fraction is
/// closest to `target`. The fraction is non-increasing in `u`.
fn calibrate_censoring(times: &[f64], uniforms: &[f64], target: f64) -> Result<f64, DataError> {
    let frac = |u: f64| times.iter().zip(uniforms).filter(|&(&t, &w)| u * w < t).count() as f64 / times.len() as f64;
    let (mut lo, mut hi) = (1e-12_f64, 1e12_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if frac(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = [lo, hi].into_iter().min_by(|&a, &b| (frac(a) - target).abs().total_cmp(&(frac(b) - target).abs())).unwrap();
    let achieved = frac(best);
    if (achieved - target).abs() > CENSORING_SLACK {
        return Err(DataError::InfeasibleCensoring { target, achieved });
    }
    Ok(best)
}

/// Bin edges at the `j/K` quantiles of the event times (all times if no events).
fn bin_edges(observed: &[f64], events: &[bool], bins: usize) -> Vec<f64> {
    let mut t: Vec<f64> = observed.iter().zip(events).filter(|(_, &e)| e).map(|(&t, _)| t).collect();
    if t.is_empty() {
        t = observed.to_vec();
    }
    t.sort_by(f64::total_cmp);
    (1..bins)
        .map(|j| {
            let pos = j as f64 / bins as f64 * (t.len() - 1) as f64;
            let (i, frac) = (pos.floor() as usize, pos.fract());
            if i + 1 < t.len() {
                t[i] * (1.0 - frac) + t[i + 1] * frac
            } else {
                t[i]
            }
        })
        .collect()
}

/// Builds a synthetic cohort. Deterministic in `config` (including the seed).
pub fn generate(config: &GeneratorConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let n = config.n_patients;
    let seed = config.seed;

    let mut rng = substream(seed, "generate.latent");
    let risk = normal_vec(&mut rng, n);
    let classes = quantile_classes(&risk, config.classes);

    let mut rng = substream(seed, "generate.times");
    let event_times: Vec<f64> =
        risk.iter().map(|&r| rng.sample::<f64, _>(Exp1) * (-config.beta * r).exp()).collect();
    let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let scale = calibrate_censoring(&event_times, &uniforms, config.censoring_rate)?;
    let censor_times: Vec<f64> = uniforms.iter().map(|w| scale * w).collect();
    let events: Vec<bool> = event_times.iter().zip(&censor_times).map(|(t, c)| t <= c).collect();
    let observed: Vec<f64> = event_times.iter().zip(&censor_times).map(|(t, c)| t.min(*c)).collect();
    let edges = bin_edges(&observed, &events, config.bins);

    let mut rng = substream(seed, "generate.directions");
    let wsi_direction = unit_vec(&mut rng, config.d_w);
    let tumor_marker = unit_vec(&mut rng, config.d_w);
    let tints: Vec<Vec<f64>> = (0..config.classes).map(|_| unit_vec(&mut rng, config.d_w)).collect();
    let gene_loading: Vec<f64> = normal_vec(&mut rng, config.d_g);

    let mut rng = substream(seed, "generate.features");
    let width = (n.max(1) as f64).log10().floor() as usize + 1;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let bag_size = rng.random_range(config.bag_min..=config.bag_max);
        let n_tumor = ((config.tumor_fraction * bag_size as f64).round() as usize).clamp(1, bag_size);
        let mut is_tumor: Vec<bool> = (0..bag_size).map(|k| k < n_tumor).collect();
        is_tumor.shuffle(&mut rng);
        let tint = &tints[classes[i] - 1];
        let mut bag = Vec::with_capacity(bag_size * config.d_w);
        for &tumor in &is_tumor {
            for c in 0..config.d_w {
                let mut v = config.wsi_noise * rng.sample::<f64, _>(StandardNormal) + config.class_tint * tint[c];
                if tumor {
                    v += tumor_marker[c] + config.wsi_signal * risk[i] * wsi_direction[c];
                }
                bag.push(v);
            }
        }
        let gene: Vec<f64> = gene_loading
            .iter()
            .map(|a| a * risk[i] + config.gene_noise * rng.sample::<f64, _>(StandardNormal))
            .collect();

        let y = 1 + edges.partition_point(|&e| e < observed[i]);
        let label = SurvivalLabel::new(y, u8::from(events[i]), None).map_err(|e| DataError::Contract(e.to_string()))?;
        let mut record = PatientRecord::new(
            format!("p{i:0width$}"),
            Some(Tensor::matrix(bag_size, config.d_w, bag)),
            Some(gene),
            label,
            classes[i],
        )?;
        record.latent_risk = Some(risk[i]);
        records.push(record);
    }

    let labels: Vec<SurvivalLabel> = records.iter().map(|r| r.label).collect();
    let folds = stratified_folds(&labels, config.folds, seed)?;
    let header = DatasetHeader::new(&records, config.bins, config.classes, config.folds, Some(config.clone()));
    Ok(Dataset { header, records, folds })
}

/// C-index of the generator's true latent risk on the given records; the
/// best any predictor can do in expectation.
pub fn oracle_c_index(records: &[&PatientRecord]) -> Result<Concordance, SurvError> {
    let risks: Option<Vec<f64>> = records.iter().map(|r| r.latent_risk).collect();
    let risks = risks.ok_or(SurvError::Undefined("records without latent risk"))?;
    let labels: Vec<SurvivalLabel> = records.iter().map(|r| r.label).collect();
    concordance_index(&risks, &labels)
}
