use std::fmt;
use std::path::{Path, PathBuf};

use flowsurv::data::{GeneratorConfig, Modality};
use flowsurv::model::{Imputation, ModelConfig, Scenario};
use flowsurv::parallel::Execution;
use serde::Deserialize;
use toml::{Table, Value};

/// Invalid or incomplete run configuration. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    out_dir: Option<PathBuf>,
    dataset: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    scenario: Option<String>,
    imputation: Option<Imputation>,
    execution: Option<Execution>,
    fold: Option<usize>,
}

/// Availability masking applied by `generate`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub modality: Modality,
    pub rate: f64,
    /// Delete the masked payloads instead of only flagging them.
    #[serde(default)]
    pub drop_payload: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    #[serde(default)]
    paths: RawPaths,
    #[serde(default)]
    run: RawRun,
    generator: Option<Table>,
    model: Option<Table>,
    mask: Option<MaskConfig>,
}

/// Everything one command needs, with one seed shared by every substream.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub model: ModelConfig,
    pub mask: Option<MaskConfig>,
    pub out_dir: PathBuf,
    pub dataset: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub scenario: Scenario,
    pub imputation: Imputation,
    pub execution: Execution,
    pub fold: Option<usize>,
}

/// Overlays `user` keys on the serialized defaults, so that unknown keys still
/// reach the target type's `deny_unknown_fields` check.
fn overlay<T: serde::Serialize>(defaults: &T, user: Option<Table>, section: &str) -> anyhow::Result<Table> {
    let mut table = match Value::try_from(defaults)? {
        Value::Table(t) => t,
        _ => unreachable!("config structs serialize to tables"),
    };
    let user = user.unwrap_or_default();
    if user.contains_key("seed") {
        return Err(config_err(format!("`{section}.seed` is not allowed; set the top-level `seed`")));
    }
    table.extend(user);
    Ok(table)
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a TOML run configuration. Relative paths resolve against the
    /// file's directory; `seed` and `out` override the file.
    pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: Table = text.parse().map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if let Some(s) = seed {
            let s = i64::try_from(s).map_err(|_| config_err("`seed` must fit in a signed 64-bit integer"))?;
            table.insert("seed".into(), Value::Integer(s));
        }
        let raw: RawConfig = table.try_into().map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_raw(raw, base, out)
    }

    fn from_raw(raw: RawConfig, base: &Path, out: Option<&Path>) -> anyhow::Result<Self> {
        let seed = raw.seed;
        let mut gen_table = overlay(&GeneratorConfig::new(200, 1.5, seed), raw.generator, "generator")?;
        gen_table.insert("seed".into(), Value::Integer(seed as i64));
        let generator: GeneratorConfig =
            gen_table.try_into().map_err(|e| config_err(format!("[generator] {e}")))?;
        generator.validate().map_err(|e| config_err(format!("[generator] {e}")))?;

        let mut model_table = overlay(&ModelConfig::default(), raw.model, "model")?;
        model_table.insert("seed".into(), Value::Integer(seed as i64));
        let model: ModelConfig = model_table.try_into().map_err(|e| config_err(format!("[model] {e}")))?;
        model.validate().map_err(|e| config_err(format!("[model] {e}")))?;
        if model.bins != generator.bins || model.classes != generator.classes {
            return Err(config_err(format!(
                "[model] bins/classes ({}/{}) differ from [generator] ({}/{})",
                model.bins, model.classes, generator.bins, generator.classes
            )));
        }

        if let Some(m) = &raw.mask {
            if !(0.0..=1.0).contains(&m.rate) {
                return Err(config_err(format!("[mask] `rate` must lie in [0, 1], got {}", m.rate)));
            }
        }

        let out_dir = match out {
            Some(o) => o.to_path_buf(),
            None => raw.paths.out_dir.map_or_else(|| base.to_path_buf(), |p| resolve(base, p)),
        };
        let dataset = raw.paths.dataset.map_or_else(|| out_dir.join("dataset.survjsonl"), |p| resolve(base, p));
        let scenario = match raw.run.scenario {
            Some(s) => s.parse().map_err(|e: String| config_err(format!("[run] `scenario`: {e}")))?,
            None => Scenario::Complete,
        };
        Ok(Self {
            seed,
            generator,
            model,
            mask: raw.mask,
            out_dir,
            dataset,
            checkpoint: raw.paths.checkpoint.map(|p| resolve(base, p)),
            scenario,
            imputation: raw.run.imputation.unwrap_or_default(),
            execution: raw.run.execution.unwrap_or_default(),
            fold: raw.run.fold,
        })
    }
}
