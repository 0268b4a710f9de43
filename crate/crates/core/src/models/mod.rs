//! The conditional noise-prediction network and the two deterministic
//! baselines, plus the shared checkpoint format. The registry is keyed by
//! {cnn, senet, cddpm}.

pub mod layers;

mod baseline;
mod checkpoint;
mod denoiser;

pub use baseline::{
    replicate_channels, BaselineKind, BaselineNet, BaselineSpec, N_RESIDUAL_BLOCKS,
    N_UPSAMPLE_LAYERS,
};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointMeta, SeedRecord, SplitRecord,
    CHECKPOINT_FORMAT_TAG, CHECKPOINT_VERSION,
};
pub use denoiser::{
    denoiser_forward, DenoiserNet, DenoiserSpec, DENOISER_IN_CHANNELS, DENOISER_OUT_CHANNELS,
};
pub use layers::WeightSource;

use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::grid::clip_in_place;

/// Registry key of the three trainable models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Senet,
    Cddpm,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Senet => "senet",
            ModelKind::Cddpm => "cddpm",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "cnn" => Ok(ModelKind::Cnn),
            "senet" => Ok(ModelKind::Senet),
            "cddpm" => Ok(ModelKind::Cddpm),
            other => Err(Error::Config(format!(
                "unknown model kind {other:?} (expected cnn|senet|cddpm)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A constructed model ready for prediction.
pub enum ModelInstance {
    Baseline(BaselineNet),
    Cddpm { net: DenoiserNet, schedule: NoiseSchedule },
}

impl ModelInstance {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelInstance::Baseline(net) => match net.spec().kind {
                BaselineKind::Cnn => ModelKind::Cnn,
                BaselineKind::Senet => ModelKind::Senet,
            },
            ModelInstance::Cddpm { .. } => ModelKind::Cddpm,
        }
    }

    pub fn grid_size(&self) -> usize {
        match self {
            ModelInstance::Baseline(net) => net.spec().grid_size,
            ModelInstance::Cddpm { net, .. } => net.spec().grid_size,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelInstance::Baseline(net) => net.param_count(),
            ModelInstance::Cddpm { net, .. } => net.param_count(),
        }
    }

    /// Predicts the four normalized target fields from a normalized
    /// satellite condition at the model grid size. The diffusion model runs
    /// its stochastic sampler (seeded by `rng`); the baselines run their
    /// deterministic forward pass. Either way the output is clipped to
    /// [0, 1] so denormalization stays physical.
    pub fn predict(&self, condition: &Array2<f64>, rng: &mut impl Rng) -> Result<Array3<f64>> {
        let (h, w) = condition.dim();
        let size = self.grid_size();
        if (h, w) != (size, size) {
            return Err(Error::ShapeMismatch {
                expected: format!("({size}, {size})"),
                got: format!("({h}, {w})"),
            });
        }
        match self {
            ModelInstance::Baseline(net) => {
                let s = net.spec().input_size();
                let small = crate::pipeline::resample(
                    &crate::grid::FieldGrid::new(
                        condition.clone(),
                        crate::grid::Channel::Satellite,
                        true,
                    ),
                    s,
                )?;
                let mut out = net.forward_image(&small.values)?;
                clip_in_place(&mut out, 0.0, 1.0);
                Ok(out)
            }
            ModelInstance::Cddpm { net, schedule } => {
                crate::diffusion::sample(net, condition, schedule, rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{build_schedule, ScheduleKind};
    use crate::rng::rng_from_seed;
    use ndarray::Array2;

    #[test]
    fn model_kind_registry_round_trip() {
        for kind in [ModelKind::Cnn, ModelKind::Senet, ModelKind::Cddpm] {
            assert_eq!(ModelKind::parse(kind.name()).unwrap(), kind);
        }
        assert!(ModelKind::parse("mlp").is_err());
    }

    #[test]
    fn predictions_are_clipped_and_shaped() {
        let condition = Array2::from_elem((32, 32), 0.5);
        let mut rng = rng_from_seed(3);

        let cnn = ModelInstance::Baseline(
            BaselineNet::new(BaselineSpec::new(BaselineKind::Cnn, 32, 8), WeightSource::seeded(1))
                .unwrap(),
        );
        let out = cnn.predict(&condition, &mut rng).unwrap();
        assert_eq!(out.dim(), (4, 32, 32));
        assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));

        let net = DenoiserNet::new(
            DenoiserSpec { grid_size: 32, base_width: 8, depth: 2, gamma_embed_dim: 16 },
            WeightSource::seeded(2),
        )
        .unwrap();
        let schedule = build_schedule(4, ScheduleKind::Linear, 1e-3, 0.3).unwrap();
        let cddpm = ModelInstance::Cddpm { net, schedule };
        let out = cddpm.predict(&condition, &mut rng).unwrap();
        assert_eq!(out.dim(), (4, 32, 32));
        assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn grid_size_mismatch_is_rejected() {
        let cnn = ModelInstance::Baseline(
            BaselineNet::new(BaselineSpec::new(BaselineKind::Cnn, 32, 8), WeightSource::seeded(1))
                .unwrap(),
        );
        let condition = Array2::from_elem((16, 16), 0.5);
        assert!(cnn.predict(&condition, &mut rng_from_seed(1)).is_err());
    }
}
