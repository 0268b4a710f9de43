//! The shared checkpoint format: a directory holding `weights.safetensors`
//! plus a `meta.json` with the format tag, architecture, schedule, the
//! normalization statistics the weights were trained under, and the split
//! bookkeeping needed to re-derive the test set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::baseline::{BaselineNet, BaselineSpec};
use super::denoiser::{DenoiserNet, DenoiserSpec};
use super::layers::{named_tensors, WeightSource};
use super::{ModelInstance, ModelKind};
use crate::diffusion::{NoiseSchedule, ScheduleConfig};
use crate::error::{Error, Result};
use crate::grid::TARGET_CHANNELS;
use crate::pipeline::NormStats;

pub const CHECKPOINT_FORMAT_TAG: &str = "stormfield.checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRecord {
    pub train: u64,
    pub split: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SplitRecord {
    pub train_typhoons: Vec<String>,
    pub test_typhoons: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_tag: String,
    pub version: u32,
    pub model: ModelKind,
    pub grid_size: usize,
    pub channel_order: Vec<String>,
    pub denoiser: Option<DenoiserSpec>,
    pub baseline: Option<BaselineSpec>,
    pub schedule: Option<ScheduleConfig>,
    pub norm_stats: NormStats,
    /// Snapshot of the experiment configuration that produced the weights.
    pub train_config: serde_json::Value,
    pub seeds: SeedRecord,
    pub split: SplitRecord,
}

impl CheckpointMeta {
    pub fn channel_order_fixed() -> Vec<String> {
        TARGET_CHANNELS.iter().map(|c| c.name().to_string()).collect()
    }
}

/// Writes `meta.json` + `weights.safetensors` under `dir`.
pub fn save_checkpoint(dir: &Path, meta: &CheckpointMeta, model: &ModelInstance) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tensors = match model {
        ModelInstance::Baseline(net) => named_tensors(net.vars()),
        ModelInstance::Cddpm { net, .. } => named_tensors(net.vars()),
    };
    candle_core::safetensors::save(&tensors, dir.join("weights.safetensors"))?;
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(meta)?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Loads and validates a checkpoint directory, reconstructing the network
/// from the stored weights.
pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointMeta, ModelInstance)> {
    let meta_path = dir.join("meta.json");
    if !meta_path.exists() {
        return Err(Error::MissingArtifact(meta_path));
    }
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;

    if meta.format_tag != CHECKPOINT_FORMAT_TAG {
        return Err(Error::CheckpointMismatch(format!(
            "unknown format tag {:?}",
            meta.format_tag
        )));
    }
    if meta.version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
            meta.version
        )));
    }
    if meta.channel_order != CheckpointMeta::channel_order_fixed() {
        return Err(Error::CheckpointMismatch(format!(
            "channel order {:?} does not match the fixed (u10, v10, sp, t2m) order",
            meta.channel_order
        )));
    }

    let weights_path = weights_file(dir)?;
    let tensors = candle_core::safetensors::load(&weights_path, &candle_core::Device::Cpu)?;
    let source = WeightSource::Loaded(tensors);

    let model = match meta.model {
        ModelKind::Cnn | ModelKind::Senet => {
            let spec = meta.baseline.clone().ok_or_else(|| {
                Error::CheckpointMismatch("baseline checkpoint lacks a baseline spec".into())
            })?;
            ModelInstance::Baseline(BaselineNet::new(spec, source)?)
        }
        ModelKind::Cddpm => {
            let spec = meta.denoiser.clone().ok_or_else(|| {
                Error::CheckpointMismatch("diffusion checkpoint lacks a denoiser spec".into())
            })?;
            let schedule_cfg = meta.schedule.ok_or_else(|| {
                Error::CheckpointMismatch("diffusion checkpoint lacks a schedule".into())
            })?;
            ModelInstance::Cddpm {
                net: DenoiserNet::new(spec, source)?,
                schedule: NoiseSchedule::from_config(&schedule_cfg)?,
            }
        }
    };
    if model.grid_size() != meta.grid_size {
        return Err(Error::CheckpointMismatch(format!(
            "meta grid size {} disagrees with architecture grid size {}",
            meta.grid_size,
            model.grid_size()
        )));
    }
    Ok((meta, model))
}

fn weights_file(dir: &Path) -> Result<PathBuf> {
    let path = dir.join("weights.safetensors");
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::ScheduleKind;
    use crate::models::baseline::BaselineKind;
    use crate::pipeline::fit_norm;
    use crate::rng::{rng_from_seed, standard_normal_2d};

    fn norm_stats() -> NormStats {
        let (sat, era): (Vec<_>, Vec<_>) = crate::ingestion::synth_dataset(3, 8, 2)
            .unwrap()
            .into_iter()
            .partition(|r| r.variable == crate::grid::Channel::Satellite);
        let pairs =
            crate::pipeline::align(&sat, &era, &crate::pipeline::AlignConfig::default()).unwrap().0;
        fit_norm(&pairs).unwrap()
    }

    fn meta(model: ModelKind) -> CheckpointMeta {
        CheckpointMeta {
            format_tag: CHECKPOINT_FORMAT_TAG.into(),
            version: CHECKPOINT_VERSION,
            model,
            grid_size: 32,
            channel_order: CheckpointMeta::channel_order_fixed(),
            denoiser: None,
            baseline: None,
            schedule: None,
            norm_stats: norm_stats(),
            train_config: serde_json::Value::Null,
            seeds: SeedRecord { train: 1, split: 2 },
            split: SplitRecord::default(),
        }
    }

    #[test]
    fn baseline_checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = BaselineSpec::new(BaselineKind::Senet, 32, 8);
        let net = BaselineNet::new(spec.clone(), WeightSource::seeded(5)).unwrap();
        let img = standard_normal_2d(&mut rng_from_seed(1), 2, 2);
        let before = net.forward_image(&img).unwrap();

        let mut m = meta(ModelKind::Senet);
        m.baseline = Some(spec);
        save_checkpoint(dir.path(), &m, &ModelInstance::Baseline(net)).unwrap();

        let (loaded_meta, loaded) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded_meta.grid_size, 32);
        let ModelInstance::Baseline(net2) = loaded else { panic!("expected baseline") };
        let after = net2.forward_image(&img).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn cddpm_checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DenoiserSpec { grid_size: 32, base_width: 8, depth: 2, gamma_embed_dim: 16 };
        let net = DenoiserNet::new(spec.clone(), WeightSource::seeded(5)).unwrap();
        let mut m = meta(ModelKind::Cddpm);
        m.denoiser = Some(spec);
        m.schedule = Some(ScheduleConfig {
            steps: 8,
            kind: ScheduleKind::Linear,
            beta_start: 1e-3,
            beta_end: 0.3,
        });
        let schedule = NoiseSchedule::from_config(&m.schedule.unwrap()).unwrap();
        save_checkpoint(dir.path(), &m, &ModelInstance::Cddpm { net, schedule }).unwrap();

        let (_, loaded) = load_checkpoint(dir.path()).unwrap();
        let ModelInstance::Cddpm { schedule, .. } = loaded else { panic!("expected cddpm") };
        assert_eq!(schedule.steps(), 8);
    }

    #[test]
    fn foreign_channel_order_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let spec = BaselineSpec::new(BaselineKind::Cnn, 32, 8);
        let net = BaselineNet::new(spec.clone(), WeightSource::seeded(5)).unwrap();
        let mut m = meta(ModelKind::Cnn);
        m.baseline = Some(spec);
        m.channel_order = vec!["t2m".into(), "sp".into(), "v10".into(), "u10".into()];
        save_checkpoint(dir.path(), &m, &ModelInstance::Baseline(net)).unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(Error::CheckpointMismatch(_))
        ));
    }

    #[test]
    fn grid_size_disagreement_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let spec = BaselineSpec::new(BaselineKind::Cnn, 32, 8);
        let net = BaselineNet::new(spec.clone(), WeightSource::seeded(5)).unwrap();
        let mut m = meta(ModelKind::Cnn);
        m.baseline = Some(spec);
        m.grid_size = 64;
        save_checkpoint(dir.path(), &m, &ModelInstance::Baseline(net)).unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(Error::CheckpointMismatch(_))
        ));
    }

    #[test]
    fn missing_files_are_named_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::MissingArtifact(_))));
    }
}
