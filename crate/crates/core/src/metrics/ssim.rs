//! Structural similarity with Gaussian-weighted local windows.
//!
//! Definition: a normalized `window x window` Gaussian kernel (sigma 1.5)
//! slides over every fully-inside position; local weighted means, variances
//! and covariance feed the usual two-factor formula with stabilizers
//! C1 = (k1 L)^2, C2 = (k2 L)^2; the score is the mean over positions. The
//! production path uses separable filtering; the test oracle recomputes
//! per-window statistics with direct loops.

use ndarray::Array2;

use crate::error::{Error, Result};

pub const SSIM_DEFAULT_WINDOW: usize = 7;
pub const SSIM_DEFAULT_K1: f64 = 0.01;
pub const SSIM_DEFAULT_K2: f64 = 0.03;
const GAUSSIAN_SIGMA: f64 = 1.5;

/// Mean local structural similarity. Requires both dimensions >= window.
pub fn ssim(
    pred: &Array2<f64>,
    truth: &Array2<f64>,
    window: usize,
    k1: f64,
    k2: f64,
    data_range: f64,
) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", truth.dim()),
            got: format!("{:?}", pred.dim()),
        });
    }
    let (h, w) = pred.dim();
    if window < 2 || h < window || w < window {
        return Err(Error::Domain(format!(
            "ssim needs grids of at least {window}x{window}, got ({h}, {w})"
        )));
    }
    if data_range <= 0.0 {
        return Err(Error::Domain("data_range must be > 0".into()));
    }

    let kernel = gaussian_kernel(window, GAUSSIAN_SIGMA);
    let mu_x = filter_valid(pred, &kernel);
    let mu_y = filter_valid(truth, &kernel);
    let xx = filter_valid(&(pred * pred), &kernel);
    let yy = filter_valid(&(truth * truth), &kernel);
    let xy = filter_valid(&(pred * truth), &kernel);

    let c1 = (k1 * data_range).powi(2);
    let c2 = (k2 * data_range).powi(2);
    let mut acc = 0.0;
    for (idx, mx) in mu_x.indexed_iter() {
        let my = mu_y[idx];
        let var_x = xx[idx] - mx * mx;
        let var_y = yy[idx] - my * my;
        let cov = xy[idx] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
        acc += num / den;
    }
    Ok(acc / mu_x.len() as f64)
}

pub fn ssim_default(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    ssim(pred, truth, SSIM_DEFAULT_WINDOW, SSIM_DEFAULT_K1, SSIM_DEFAULT_K2, 1.0)
}

/// Normalized 2-D Gaussian tap weights.
pub(crate) fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - half;
            (-0.5 * (d / sigma).powi(2)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable valid-mode filtering with the 1-D taps in both directions.
fn filter_valid(src: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (h, w) = src.dim();
    let k = taps.len();
    let mut rows = Array2::zeros((h, w - k + 1));
    for i in 0..h {
        for j in 0..=w - k {
            let mut acc = 0.0;
            for (t, tap) in taps.iter().enumerate() {
                acc += tap * src[[i, j + t]];
            }
            rows[[i, j]] = acc;
        }
    }
    let mut out = Array2::zeros((h - k + 1, w - k + 1));
    for i in 0..=h - k {
        for j in 0..rows.dim().1 {
            let mut acc = 0.0;
            for (t, tap) in taps.iter().enumerate() {
                acc += tap * rows[[i + t, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal_2d};

    #[test]
    fn identical_inputs_score_one() {
        let a = standard_normal_2d(&mut rng_from_seed(1), 16, 16).mapv(|v| v * 0.2 + 0.5);
        let s = ssim_default(&a, &a).unwrap();
        assert!((s - 1.0).abs() < 1e-12, "ssim(x, x) = {s}");
    }

    #[test]
    fn inverted_checkerboard_scores_low() {
        let a = Array2::from_shape_fn((16, 16), |(i, j)| ((i + j) % 2) as f64);
        let b = a.mapv(|v| 1.0 - v);
        let s = ssim_default(&a, &b).unwrap();
        assert!(s < 0.2, "inverted checkerboard ssim {s}");
    }

    #[test]
    fn symmetric_to_argument_order() {
        let mut rng = rng_from_seed(2);
        for _ in 0..10 {
            let a = standard_normal_2d(&mut rng, 12, 12).mapv(|v| v * 0.2 + 0.5);
            let b = standard_normal_2d(&mut rng, 12, 12).mapv(|v| v * 0.2 + 0.5);
            let ab = ssim_default(&a, &b).unwrap();
            let ba = ssim_default(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_smaller_than_window_is_domain_error() {
        let a = Array2::zeros((6, 6));
        assert!(matches!(ssim_default(&a, &a), Err(Error::Domain(_))));
    }

    /// Independent oracle: per-window double loop over explicit weighted
    /// sums, no separable filtering.
    pub(crate) fn ssim_brute_force(
        pred: &Array2<f64>,
        truth: &Array2<f64>,
        window: usize,
        k1: f64,
        k2: f64,
        data_range: f64,
    ) -> f64 {
        let taps = gaussian_kernel(window, 1.5);
        let (h, w) = pred.dim();
        let c1 = (k1 * data_range).powi(2);
        let c2 = (k2 * data_range).powi(2);
        let mut acc = 0.0;
        let mut count = 0usize;
        for i0 in 0..=h - window {
            for j0 in 0..=w - window {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for di in 0..window {
                    for dj in 0..window {
                        let wgt = taps[di] * taps[dj];
                        let x = pred[[i0 + di, j0 + dj]];
                        let y = truth[[i0 + di, j0 + dj]];
                        mx += wgt * x;
                        my += wgt * y;
                        xx += wgt * x * x;
                        yy += wgt * y * y;
                        xy += wgt * x * y;
                    }
                }
                let num = (2.0 * mx * my + c1) * (2.0 * (xy - mx * my) + c2);
                let den =
                    (mx * mx + my * my + c1) * ((xx - mx * mx) + (yy - my * my) + c2);
                acc += num / den;
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn separable_path_matches_brute_force() {
        let mut rng = rng_from_seed(3);
        for _ in 0..25 {
            let a = standard_normal_2d(&mut rng, 8, 8).mapv(|v| v * 0.2 + 0.5);
            let b = standard_normal_2d(&mut rng, 8, 8).mapv(|v| v * 0.2 + 0.5);
            let fast = ssim_default(&a, &b).unwrap();
            let slow = ssim_brute_force(&a, &b, SSIM_DEFAULT_WINDOW, 0.01, 0.03, 1.0);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        }
    }
}
