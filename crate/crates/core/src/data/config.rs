use serde::{Deserialize, Serialize};

use super::DataError;

/// Parameters of the synthetic cohort.
///
/// Each patient has a latent risk `r ~ N(0, 1)`. Event times follow a
/// proportional-hazards model with log-hazard `beta * r`; slide bags carry `r`
/// on a small random subset of "tumor" instances; gene profiles are a noisy
/// linear view of `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    /// Instance feature width.
    pub d_w: usize,
    /// Gene profile length.
    pub d_g: usize,
    pub bag_min: usize,
    pub bag_max: usize,
    /// Number of discrete time bins K.
    pub bins: usize,
    /// Target fraction of censored patients, in (0, 1).
    pub censoring_rate: f64,
    /// Effect of the latent risk on the log-hazard.
    pub beta: f64,
    pub classes: usize,
    pub seed: u64,
    #[serde(default = "defaults::folds")]
    pub folds: usize,
    /// Fraction of bag instances carrying the risk signal.
    #[serde(default = "defaults::tumor_fraction")]
    pub tumor_fraction: f64,
    /// Per-coordinate noise on every instance.
    #[serde(default = "defaults::wsi_noise")]
    pub wsi_noise: f64,
    /// Length of the risk direction added to tumor instances per unit of `r`.
    #[serde(default = "defaults::wsi_signal")]
    pub wsi_signal: f64,
    /// Per-coordinate noise on the gene profile.
    #[serde(default = "defaults::gene_noise")]
    pub gene_noise: f64,
    /// Length of the class-specific offset added to every instance.
    #[serde(default = "defaults::class_tint")]
    pub class_tint: f64,
}

mod defaults {
    pub fn folds() -> usize {
        5
    }
    pub fn tumor_fraction() -> f64 {
        0.1
    }
    pub fn wsi_noise() -> f64 {
        1.0
    }
    pub fn wsi_signal() -> f64 {
        2.0
    }
    pub fn gene_noise() -> f64 {
        0.5
    }
    pub fn class_tint() -> f64 {
        0.5
    }
}

impl GeneratorConfig {
    /// Defaults for everything except the cohort size, signal and seed.
    pub fn new(n_patients: usize, beta: f64, seed: u64) -> Self {
        Self {
            n_patients,
            d_w: 16,
            d_g: 16,
            bag_min: 8,
            bag_max: 16,
            bins: 4,
            censoring_rate: 0.3,
            beta,
            classes: 4,
            seed,
            folds: defaults::folds(),
            tumor_fraction: defaults::tumor_fraction(),
            wsi_noise: defaults::wsi_noise(),
            wsi_signal: defaults::wsi_signal(),
            gene_noise: defaults::gene_noise(),
            class_tint: defaults::class_tint(),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let positive = [
            ("n_patients", self.n_patients),
            ("d_w", self.d_w),
            ("d_g", self.d_g),
            ("bag_min", self.bag_min),
            ("bins", self.bins),
            ("classes", self.classes),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(DataError::Config(format!("`{key}` must be positive")));
            }
        }
        if self.bag_max < self.bag_min {
            return Err(DataError::Config(format!("`bag_max` ({}) below `bag_min` ({})", self.bag_max, self.bag_min)));
        }
        if !(self.censoring_rate > 0.0 && self.censoring_rate < 1.0) {
            return Err(DataError::Config(format!("`censoring_rate` must lie in (0, 1), got {}", self.censoring_rate)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(DataError::Config(format!("`beta` must be finite and non-negative, got {}", self.beta)));
        }
        if self.folds < 2 || self.folds > self.n_patients {
            return Err(DataError::Config(format!("`folds` must lie in 2..={}, got {}", self.n_patients, self.folds)));
        }
        if !(self.tumor_fraction > 0.0 && self.tumor_fraction <= 1.0) {
            return Err(DataError::Config(format!("`tumor_fraction` must lie in (0, 1], got {}", self.tumor_fraction)));
        }
        for (key, v) in [
            ("wsi_noise", self.wsi_noise),
            ("wsi_signal", self.wsi_signal),
            ("gene_noise", self.gene_noise),
            ("class_tint", self.class_tint),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DataError::Config(format!("`{key}` must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}
