//! Training and evaluation of a conditional denoising diffusion model (plus
//! CNN and squeeze-excitation baselines) that translates single-channel
//! typhoon satellite imagery into four co-registered surface meteorological
//! fields (u10, v10, sp, t2m).
//!
//! The crate is organized along the processing chain:
//!
//! * [`ingestion`] — container readers, a synthetic data generator, and the
//!   dataset directory layout;
//! * [`pipeline`] — cleaning, alignment, normalization, resampling,
//!   augmentation and the grouped train/test split;
//! * [`diffusion`] — the noise schedule, the forward process, the
//!   noise-prediction objective and iterative conditional sampling;
//! * [`models`] — the conditional U-Net denoiser and the two deterministic
//!   baselines;
//! * [`metrics`] — the evaluation suite (KL divergence, RMSE, MAE, PSNR,
//!   SSIM, FID, perceptual distance, pixel mismatch, wind magnitude);
//! * [`runner`] — experiment orchestration: training, evaluation, reports,
//!   configs and manifests.

pub mod error;
pub mod geo;
pub mod grid;
pub mod diffusion;
pub mod ingestion;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
pub use geo::GeoWindow;
pub use grid::{Channel, FieldGrid, SamplePair, ALL_CHANNELS, TARGET_CHANNELS};
