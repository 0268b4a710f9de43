//! The run manifest: everything needed to trace a reported number back to
//! the run that produced it. Written atomically (temp file + rename) at run
//! end.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSeeds {
    pub train: u64,
    pub split: u64,
    pub eval: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub created_utc: DateTime<Utc>,
    pub code_version: String,
    pub model: ModelKind,
    pub status: RunStatus,
    /// Present when status is Failed.
    pub failure: Option<String>,
    pub config: serde_json::Value,
    pub seeds: RunSeeds,
    pub train_wall_secs: f64,
    pub n_train_pairs: usize,
    pub n_test_pairs: usize,
    pub model_param_count: usize,
    pub first_epoch_mean_loss: Option<f64>,
    pub final_epoch_mean_loss: Option<f64>,
    pub checkpoint_path: Option<PathBuf>,
    pub loss_curve_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
}

impl RunManifest {
    /// Atomic write: the manifest appears complete or not at all.
    pub fn write(&self, run_dir: &Path) -> Result<PathBuf> {
        let path = run_dir.join("manifest.json");
        let tmp = run_dir.join(".manifest.json.tmp");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(run_dir: &Path) -> Result<RunManifest> {
        let path = run_dir.join("manifest.json");
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn code_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_is_atomic() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            created_utc: Utc::now(),
            code_version: code_version(),
            model: ModelKind::Cnn,
            status: RunStatus::Succeeded,
            failure: None,
            config: serde_json::json!({"x": 1}),
            seeds: RunSeeds { train: 1, split: 2, eval: 3 },
            train_wall_secs: 0.5,
            n_train_pairs: 8,
            n_test_pairs: 2,
            model_param_count: 123,
            first_epoch_mean_loss: Some(1.0),
            final_epoch_mean_loss: Some(0.4),
            checkpoint_path: Some(dir.path().join("checkpoint")),
            loss_curve_path: None,
            metrics_path: None,
        };
        manifest.write(dir.path()).unwrap();
        assert!(!dir.path().join(".manifest.json.tmp").exists());
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back.status, RunStatus::Succeeded);
        assert_eq!(back.n_train_pairs, 8);
    }
}
