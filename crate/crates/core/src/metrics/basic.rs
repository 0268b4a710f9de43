//! Pixel-space distance metrics and the derived wind-magnitude field.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Channel, FieldGrid};

/// PSNR is capped here: identical inputs report 100 dB instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

fn check_shapes(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", truth.dim()),
            got: format!("{:?}", pred.dim()),
        });
    }
    Ok(())
}

/// Root mean squared error over all pixels.
pub fn rmse(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    check_shapes(pred, truth)?;
    let mse = (pred - truth).mapv(|d| d * d).mean().unwrap_or(0.0);
    Ok(mse.sqrt())
}

/// Mean absolute error over all pixels.
pub fn mae(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    check_shapes(pred, truth)?;
    Ok((pred - truth).mapv(f64::abs).mean().unwrap_or(0.0))
}

/// Peak signal-to-noise ratio, 10 log10(range^2 / MSE), in dB, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(pred: &Array2<f64>, truth: &Array2<f64>, data_range: f64) -> Result<f64> {
    check_shapes(pred, truth)?;
    if data_range <= 0.0 {
        return Err(Error::Domain(format!("data_range must be > 0, got {data_range}")));
    }
    let mse = (pred - truth).mapv(|d| d * d).mean().unwrap_or(0.0);
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (data_range * data_range / mse).log10()).min(PSNR_CAP_DB))
}

/// Number of pixels whose absolute deviation exceeds the threshold
/// (strictly greater). Per-set aggregation averages these counts over test
/// items; see the evaluation module.
pub fn pixel_mismatch(pred: &Array2<f64>, truth: &Array2<f64>, threshold: f64) -> Result<f64> {
    check_shapes(pred, truth)?;
    Ok(pred
        .iter()
        .zip(truth.iter())
        .filter(|(a, b)| (*a - *b).abs() > threshold)
        .count() as f64)
}

/// Per-pixel Euclidean norm of the two wind components, in physical units.
/// Normalized inputs are rejected: magnitude in normalized units is
/// meaningless because the two channels scale differently.
pub fn wind_magnitude(u10: &FieldGrid, v10: &FieldGrid) -> Result<Array2<f64>> {
    if u10.channel != Channel::U10 || v10.channel != Channel::V10 {
        return Err(Error::ChannelMismatch {
            expected: "u10 and v10".into(),
            got: format!("{} and {}", u10.channel, v10.channel),
        });
    }
    if u10.normalized || v10.normalized {
        return Err(Error::Domain(
            "wind magnitude must be computed in physical units, not normalized values".into(),
        ));
    }
    wind_magnitude_arrays(&u10.values, &v10.values)
}

/// The same norm on raw arrays (already known to be physical units).
pub fn wind_magnitude_arrays(u: &Array2<f64>, v: &Array2<f64>) -> Result<Array2<f64>> {
    check_shapes(u, v)?;
    let mut out = Array2::zeros(u.dim());
    ndarray::Zip::from(&mut out).and(u).and(v).for_each(|m, &a, &b| *m = a.hypot(b));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal_2d};
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn zero_on_identical_inputs() {
        let a = standard_normal_2d(&mut rng_from_seed(1), 8, 8);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
        assert_eq!(pixel_mismatch(&a, &a, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_gives_offset_error() {
        let a = standard_normal_2d(&mut rng_from_seed(2), 8, 8);
        let b = &a + 0.1;
        assert!((rmse(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        assert!((mae(&a, &b).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn psnr_formula_on_known_mse() {
        // uniform deviation 0.1 -> MSE 0.01 -> 20 dB at unit range
        let a = Array2::from_elem((8, 8), 0.4);
        let b = Array2::from_elem((8, 8), 0.5);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_oracle_agreement() {
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let a = standard_normal_2d(&mut rng, 8, 8);
            let b = standard_normal_2d(&mut rng, 8, 8);
            let mut sq = 0.0;
            let mut ab = 0.0;
            for i in 0..8 {
                for j in 0..8 {
                    let d: f64 = a[[i, j]] - b[[i, j]];
                    sq += d * d;
                    ab += d.abs();
                }
            }
            assert!((rmse(&a, &b).unwrap() - (sq / 64.0).sqrt()).abs() < 1e-12);
            assert!((mae(&a, &b).unwrap() - ab / 64.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatch_is_monotone_in_threshold() {
        let mut rng = rng_from_seed(4);
        let a = standard_normal_2d(&mut rng, 16, 16);
        let b = standard_normal_2d(&mut rng, 16, 16);
        let mut last = f64::INFINITY;
        for thr in [0.01, 0.05, 0.2, 1.0, 3.0] {
            let m = pixel_mismatch(&a, &b, thr).unwrap();
            assert!(m <= last, "mismatch must not grow as the threshold grows");
            last = m;
        }
    }

    #[test]
    fn pythagorean_triple() {
        let u = FieldGrid::new(array![[3.0]], Channel::U10, false);
        let v = FieldGrid::new(array![[4.0]], Channel::V10, false);
        assert_eq!(wind_magnitude(&u, &v).unwrap()[[0, 0]], 5.0);
        let z_u = FieldGrid::new(array![[0.0]], Channel::U10, false);
        let z_v = FieldGrid::new(array![[0.0]], Channel::V10, false);
        assert_eq!(wind_magnitude(&z_u, &z_v).unwrap()[[0, 0]], 0.0);
    }

    #[test]
    fn magnitude_is_rotation_invariant() {
        let mut rng = rng_from_seed(5);
        let u = standard_normal_2d(&mut rng, 8, 8);
        let v = standard_normal_2d(&mut rng, 8, 8);
        let m0 = wind_magnitude_arrays(&u, &v).unwrap();
        for _ in 0..10 {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            let ur = &u * c - &v * s;
            let vr = &u * s + &v * c;
            let m = wind_magnitude_arrays(&ur, &vr).unwrap();
            let max_err = (&m - &m0).iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
            assert!(max_err < 1e-9, "rotation changed magnitude by {max_err}");
        }
    }

    #[test]
    fn normalized_inputs_are_rejected() {
        let u = FieldGrid::new(array![[0.5]], Channel::U10, true);
        let v = FieldGrid::new(array![[0.5]], Channel::V10, true);
        assert!(wind_magnitude(&u, &v).is_err());
        let u = FieldGrid::new(array![[0.5]], Channel::U10, false);
        let t = FieldGrid::new(array![[0.5]], Channel::T2m, false);
        assert!(matches!(wind_magnitude(&u, &t), Err(Error::ChannelMismatch { .. })));
    }
}
