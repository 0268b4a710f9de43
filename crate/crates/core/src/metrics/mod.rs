//! The evaluation suite: KL divergence, RMSE, MAE, PSNR, SSIM, FID,
//! perceptual distance, pixel mismatch, and the derived wind-magnitude
//! field, plus the per-variable report structures.
//!
//! Aggregation over a test set: rmse/mae/psnr/ssim/kl/perceptual are
//! computed per item and averaged; FID is set-level by definition; pixel
//! mismatch is the mean per-image count of pixels beyond the threshold.

mod basic;
mod features;
mod fid;
mod kl;
mod perceptual;
mod ssim;

pub use basic::{
    mae, pixel_mismatch, psnr, rmse, wind_magnitude, wind_magnitude_arrays, PSNR_CAP_DB,
};
pub use features::{FeatureExtractor, RandomConvFeatures, DEFAULT_FEATURE_SEED};
pub use fid::{feature_stats, fid, frechet_distance, FID_EIGENVALUE_CLAMP};
pub use kl::{kl_div, kl_div_default, kl_from_histograms, KL_DEFAULT_BINS, KL_SMOOTHING};
pub use perceptual::perceptual_distance;
pub use ssim::{ssim, ssim_default, SSIM_DEFAULT_K1, SSIM_DEFAULT_K2, SSIM_DEFAULT_WINDOW};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Channel, TARGET_CHANNELS};

/// Fixed column order of every emitted metric table.
pub const METRIC_COLUMNS: [&str; 7] =
    ["KL-Div", "RMSE", "MAE", "PSNR", "SSIM", "FID", "LPIPS"];

/// Default |deviation| threshold for the pixel-mismatch count, in
/// normalized units.
pub const MISMATCH_DEFAULT_THRESHOLD: f64 = 0.05;

/// Reference values from the original full-scale experiments, recorded for
/// documentation and comparison tables. Desk-scale runs are NOT expected to
/// reproduce them.
pub const REFERENCE_FULL_SCALE_CDDPM_MEAN_PSNR_DB: f64 = 32.807;
pub const REFERENCE_FULL_SCALE_CDDPM_MEAN_RMSE: f64 = 0.032;
pub const REFERENCE_FULL_SCALE_CDDPM_MEAN_SSIM: f64 = 0.929;
pub const REFERENCE_FULL_SCALE_MISMATCH_CNN_MEAN: f64 = 143.520;
pub const REFERENCE_FULL_SCALE_MISMATCH_CDDPM_MEAN: f64 = 153.329;

/// One row of the metric table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub kl_div: f64,
    pub rmse: f64,
    pub mae: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub fid: f64,
    pub lpips: f64,
}

impl MetricRow {
    pub fn values(&self) -> [f64; 7] {
        [self.kl_div, self.rmse, self.mae, self.psnr, self.ssim, self.fid, self.lpips]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// Per-variable rows plus the mean row (the arithmetic mean of the four
/// variable rows, per metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_variable: [MetricRow; 4],
    pub mean: MetricRow,
}

impl MetricsReport {
    /// Builds the report from the four variable rows, deriving the mean row.
    pub fn from_rows(per_variable: [MetricRow; 4]) -> MetricsReport {
        let avg = |f: fn(&MetricRow) -> f64| -> f64 {
            per_variable.iter().map(f).sum::<f64>() / 4.0
        };
        let mean = MetricRow {
            kl_div: avg(|r| r.kl_div),
            rmse: avg(|r| r.rmse),
            mae: avg(|r| r.mae),
            psnr: avg(|r| r.psnr),
            ssim: avg(|r| r.ssim),
            fid: avg(|r| r.fid),
            lpips: avg(|r| r.lpips),
        };
        MetricsReport { per_variable, mean }
    }

    pub fn row(&self, channel: Channel) -> &MetricRow {
        &self.per_variable[channel.index()]
    }

    /// Report invariants: the mean row is the exact arithmetic mean and
    /// every value is finite with the right sign/range.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = MetricsReport::from_rows(self.per_variable);
        if rebuilt.mean != self.mean {
            return Err(Error::Domain("mean row is not the average of variable rows".into()));
        }
        for row in self.per_variable.iter().chain([&self.mean]) {
            if !row.is_finite() {
                return Err(Error::Domain("metric table contains non-finite values".into()));
            }
            if row.rmse < 0.0 || row.mae < 0.0 || row.kl_div < -1e-12 || row.fid < 0.0
                || row.lpips < 0.0
            {
                return Err(Error::Domain("distance metric went negative".into()));
            }
            if !(-1.0..=1.0).contains(&row.ssim) {
                return Err(Error::Domain(format!("ssim {} outside [-1, 1]", row.ssim)));
            }
        }
        Ok(())
    }
}

/// Pixel-mismatch values per variable plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub per_variable: [f64; 4],
    pub mean: f64,
    pub threshold: f64,
}

impl MismatchReport {
    pub fn from_values(per_variable: [f64; 4], threshold: f64) -> MismatchReport {
        MismatchReport {
            per_variable,
            mean: per_variable.iter().sum::<f64>() / 4.0,
            threshold,
        }
    }
}

/// Computes the full metric table over a test set of predicted / true
/// normalized (4, H, W) stacks.
pub fn evaluate_sets(
    preds: &[Array3<f64>],
    truths: &[Array3<f64>],
    extractor: &dyn FeatureExtractor,
) -> Result<MetricsReport> {
    check_sets(preds, truths)?;
    let n = preds.len() as f64;
    let mut rows = Vec::with_capacity(4);
    for ch in TARGET_CHANNELS {
        let c = ch.index();
        let pred_grids: Vec<Array2<f64>> =
            preds.iter().map(|p| p.index_axis(ndarray::Axis(0), c).to_owned()).collect();
        let true_grids: Vec<Array2<f64>> =
            truths.iter().map(|t| t.index_axis(ndarray::Axis(0), c).to_owned()).collect();

        let mut row = MetricRow {
            kl_div: 0.0,
            rmse: 0.0,
            mae: 0.0,
            psnr: 0.0,
            ssim: 0.0,
            fid: 0.0,
            lpips: 0.0,
        };
        for (p, t) in pred_grids.iter().zip(&true_grids) {
            row.kl_div += kl_div_default(p, t)?;
            row.rmse += rmse(p, t)?;
            row.mae += mae(p, t)?;
            row.psnr += psnr(p, t, 1.0)?;
            row.ssim += ssim_default(p, t)?;
            row.lpips += perceptual_distance(p, t, extractor)?;
        }
        row.kl_div /= n;
        row.rmse /= n;
        row.mae /= n;
        row.psnr /= n;
        row.ssim /= n;
        row.lpips /= n;
        row.fid = if preds.len() >= 2 { fid(&pred_grids, &true_grids, extractor)? } else { 0.0 };
        rows.push(row);
    }
    let report = MetricsReport::from_rows([rows[0], rows[1], rows[2], rows[3]]);
    report.validate()?;
    Ok(report)
}

/// Mean per-image mismatch counts per variable over a test set.
pub fn mismatch_sets(
    preds: &[Array3<f64>],
    truths: &[Array3<f64>],
    threshold: f64,
) -> Result<MismatchReport> {
    check_sets(preds, truths)?;
    let n = preds.len() as f64;
    let mut per_variable = [0.0; 4];
    for ch in TARGET_CHANNELS {
        let c = ch.index();
        for (p, t) in preds.iter().zip(truths) {
            per_variable[c] += pixel_mismatch(
                &p.index_axis(ndarray::Axis(0), c).to_owned(),
                &t.index_axis(ndarray::Axis(0), c).to_owned(),
                threshold,
            )?;
        }
        per_variable[c] /= n;
    }
    Ok(MismatchReport::from_values(per_variable, threshold))
}

fn check_sets(preds: &[Array3<f64>], truths: &[Array3<f64>]) -> Result<()> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(Error::EmptyDataset(format!(
            "evaluation needs equal non-empty sets, got {} and {}",
            preds.len(),
            truths.len()
        )));
    }
    for (p, t) in preds.iter().zip(truths) {
        if p.dim() != t.dim() || p.dim().0 != 4 {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", t.dim()),
                got: format!("{:?}", p.dim()),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal_3d};

    fn stacks(n: usize, seed: u64) -> Vec<Array3<f64>> {
        (0..n)
            .map(|i| {
                standard_normal_3d(&mut rng_from_seed(seed + i as u64), 4, 16, 16)
                    .mapv(|v| (v * 0.2 + 0.5).clamp(0.0, 1.0))
            })
            .collect()
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let fx = RandomConvFeatures::default();
        let set = stacks(4, 1);
        let report = evaluate_sets(&set, &set, &fx).unwrap();
        for ch in TARGET_CHANNELS {
            let row = report.row(ch);
            assert_eq!(row.rmse, 0.0);
            assert_eq!(row.mae, 0.0);
            assert_eq!(row.psnr, PSNR_CAP_DB);
            assert!((row.ssim - 1.0).abs() < 1e-12);
            assert!(row.kl_div.abs() < 1e-9);
            assert!(row.fid.abs() < 1e-6);
            assert_eq!(row.lpips, 0.0);
        }
        let mm = mismatch_sets(&set, &set, MISMATCH_DEFAULT_THRESHOLD).unwrap();
        assert_eq!(mm.per_variable, [0.0; 4]);
        assert_eq!(mm.mean, 0.0);
    }

    #[test]
    fn mean_row_is_exact_average() {
        let fx = RandomConvFeatures::default();
        let report = evaluate_sets(&stacks(5, 2), &stacks(5, 50), &fx).unwrap();
        report.validate().unwrap();
        let expected: f64 =
            report.per_variable.iter().map(|r| r.rmse).sum::<f64>() / 4.0;
        assert_eq!(report.mean.rmse, expected);
    }

    #[test]
    fn reference_constants_pinned() {
        assert_eq!(REFERENCE_FULL_SCALE_CDDPM_MEAN_PSNR_DB, 32.807);
        assert_eq!(REFERENCE_FULL_SCALE_CDDPM_MEAN_RMSE, 0.032);
        assert_eq!(REFERENCE_FULL_SCALE_CDDPM_MEAN_SSIM, 0.929);
        assert_eq!(REFERENCE_FULL_SCALE_MISMATCH_CNN_MEAN, 143.520);
        assert_eq!(REFERENCE_FULL_SCALE_MISMATCH_CDDPM_MEAN, 153.329);
    }

    #[test]
    fn column_order_is_pinned() {
        assert_eq!(
            METRIC_COLUMNS,
            ["KL-Div", "RMSE", "MAE", "PSNR", "SSIM", "FID", "LPIPS"]
        );
    }

    #[test]
    fn validate_rejects_tampered_mean() {
        let fx = RandomConvFeatures::default();
        let mut report = evaluate_sets(&stacks(4, 3), &stacks(4, 60), &fx).unwrap();
        report.mean.rmse += 0.1;
        assert!(report.validate().is_err());
    }
}
