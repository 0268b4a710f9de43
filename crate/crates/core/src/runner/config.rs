//! Experiment configuration: a TOML file with a schema-version field.
//! Exactly two environment overrides exist: `STORMFIELD_OUTPUT_DIR`
//! replaces `output_dir`, and `STORMFIELD_SEED` replaces `train_seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{ScheduleConfig, ScheduleKind};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::pipeline::AugmentConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

pub const ENV_OUTPUT_DIR: &str = "STORMFIELD_OUTPUT_DIR";
pub const ENV_SEED: &str = "STORMFIELD_SEED";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { learning_rate: 2e-4, batch_size: 8, epochs: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub base_width: usize,
    /// Denoiser resolution levels.
    pub depth: usize,
    pub gamma_embed_dim: usize,
    /// SENet gate reduction.
    pub se_reduction: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { base_width: 16, depth: 3, gamma_embed_dim: 64, se_reduction: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSection {
    pub enabled: bool,
    pub noise_std: f64,
    pub gaussian_sigma: f64,
    pub contrast_lo: f64,
    pub contrast_hi: f64,
    pub noise_probability: f64,
    pub smoothing_probability: f64,
    pub contrast_probability: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let a = AugmentConfig::default();
        AugmentSection {
            enabled: true,
            noise_std: a.noise_std,
            gaussian_sigma: a.gaussian_sigma,
            contrast_lo: a.contrast_range.0,
            contrast_hi: a.contrast_range.1,
            noise_probability: a.noise_probability,
            smoothing_probability: a.smoothing_probability,
            contrast_probability: a.contrast_probability,
        }
    }
}

impl AugmentSection {
    pub fn to_config(&self) -> AugmentConfig {
        AugmentConfig {
            noise_std: self.noise_std,
            gaussian_sigma: self.gaussian_sigma,
            contrast_range: (self.contrast_lo, self.contrast_hi),
            noise_probability: self.noise_probability,
            smoothing_probability: self.smoothing_probability,
            contrast_probability: self.contrast_probability,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    pub train_fraction: f64,
    pub clean_max_bad_fraction: f64,
    pub align_tolerance_minutes: i64,
    pub mismatch_threshold: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            train_fraction: 0.8,
            clean_max_bad_fraction: 0.05,
            align_tolerance_minutes: 0,
            mismatch_threshold: crate::metrics::MISMATCH_DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dataset: PathBuf,
    pub model: ModelKind,
    pub output_dir: PathBuf,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default = "default_train_seed")]
    pub train_seed: u64,
    #[serde(default = "default_eval_seed")]
    pub eval_seed: u64,
    /// Stochastic draws per test item during evaluation (averaged).
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub model_params: ModelParams,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
}

fn default_grid_size() -> usize {
    64
}
fn default_split_seed() -> u64 {
    42
}
fn default_train_seed() -> u64 {
    7
}
fn default_eval_seed() -> u64 {
    1234
}
fn default_n_draws() -> usize {
    1
}

impl ExperimentConfig {
    /// A ready-to-edit template with documented defaults.
    pub fn template(dataset: PathBuf, model: ModelKind, output_dir: PathBuf) -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            dataset,
            model,
            output_dir,
            grid_size: default_grid_size(),
            split_seed: default_split_seed(),
            train_seed: default_train_seed(),
            eval_seed: default_eval_seed(),
            n_draws: default_n_draws(),
            schedule: ScheduleConfig::default(),
            optimizer: OptimizerConfig::default(),
            model_params: ModelParams::default(),
            augment: AugmentSection::default(),
            pipeline: PipelineSection::default(),
        }
    }

    /// Parses the TOML file and applies the two environment overrides.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = toml::from_str(&text)?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema_version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            if !dir.is_empty() {
                config.output_dir = PathBuf::from(dir);
            }
        }
        if let Ok(seed) = std::env::var(ENV_SEED) {
            if !seed.is_empty() {
                config.train_seed = seed
                    .parse()
                    .map_err(|_| Error::Config(format!("{ENV_SEED} must be an integer, got {seed:?}")))?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dataset.exists() {
            return Err(Error::Config(format!(
                "dataset path {} does not exist",
                self.dataset.display()
            )));
        }
        if self.optimizer.batch_size == 0 || self.optimizer.epochs == 0 {
            return Err(Error::Config("optimizer batch_size and epochs must be > 0".into()));
        }
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be >= 1".into()));
        }
        if !(0.0 < self.pipeline.train_fraction && self.pipeline.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn schedule_kind_name(&self) -> &'static str {
        match self.schedule.kind {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
        }
    }

    pub fn snapshot_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_min_config(dir: &Path) -> PathBuf {
        let dataset = dir.join("ds");
        std::fs::create_dir_all(&dataset).unwrap();
        let path = dir.join("exp.toml");
        std::fs::write(
            &path,
            format!(
                "schema_version = 1\ndataset = {dataset:?}\nmodel = \"cddpm\"\noutput_dir = {out:?}\n",
                dataset = dataset,
                out = dir.join("out")
            ),
        )
        .unwrap();
        path
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_min_config(dir.path());
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.grid_size, 64);
        assert_eq!(cfg.optimizer.learning_rate, 2e-4);
        assert_eq!(cfg.schedule.steps, 1000);
        assert_eq!(cfg.n_draws, 1);
        assert!(cfg.augment.enabled);
    }

    #[test]
    fn schema_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = dir.path().join("ds");
        std::fs::create_dir_all(&dataset).unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(
            &path,
            format!("schema_version = 9\ndataset = {dataset:?}\nmodel = \"cnn\"\noutput_dir = \"o\"\n"),
        )
        .unwrap();
        assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config(_))));
    }

    #[test]
    fn missing_dataset_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(
            &path,
            "schema_version = 1\ndataset = \"/nonexistent\"\nmodel = \"cnn\"\noutput_dir = \"o\"\n",
        )
        .unwrap();
        assert!(ExperimentConfig::load(&path).is_err());
    }

    #[test]
    fn template_round_trips_through_toml() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = dir.path().join("ds");
        std::fs::create_dir_all(&dataset).unwrap();
        let cfg = ExperimentConfig::template(dataset, ModelKind::Senet, dir.path().join("out"));
        let path = dir.path().join("exp.toml");
        cfg.save(&path).unwrap();
        let back = ExperimentConfig::load(&path).unwrap();
        assert_eq!(back.model, ModelKind::Senet);
        assert_eq!(back.schema_version, CONFIG_SCHEMA_VERSION);
    }
}
