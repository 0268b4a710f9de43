//! Bilinear resampling onto the square model grid.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, SamplePair};

/// Bilinear resampling to `target_size` x `target_size`. Grid corners map to
/// corners, so constant grids stay constant and no value leaves the input
/// range (bilinear weights are convex).
pub fn resample(grid: &FieldGrid, target_size: usize) -> Result<FieldGrid> {
    if target_size < 2 {
        return Err(Error::Domain(format!(
            "resample target_size must be >= 2, got {target_size}"
        )));
    }
    let (h, w) = grid.shape();
    if h < 2 || w < 2 {
        return Err(Error::Domain(format!(
            "resample input must be at least 2x2, got ({h}, {w})"
        )));
    }
    let values = bilinear(&grid.values, target_size, target_size);
    Ok(FieldGrid {
        values,
        channel: grid.channel,
        normalized: grid.normalized,
        units: grid.units.clone(),
    })
}

/// Resamples every grid of a pair to the model grid size.
pub fn resample_pair(pair: &SamplePair, target_size: usize) -> Result<SamplePair> {
    SamplePair::new(
        resample(&pair.condition, target_size)?,
        [
            resample(&pair.targets[0], target_size)?,
            resample(&pair.targets[1], target_size)?,
            resample(&pair.targets[2], target_size)?,
            resample(&pair.targets[3], target_size)?,
        ],
        pair.timestamp,
        pair.typhoon_id.clone(),
    )
}

pub(crate) fn bilinear(src: &Array2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let scale_i = (h - 1) as f64 / (out_h - 1).max(1) as f64;
    let scale_j = (w - 1) as f64 / (out_w - 1).max(1) as f64;
    Array2::from_shape_fn((out_h, out_w), |(oi, oj)| {
        let fi = oi as f64 * scale_i;
        let fj = oj as f64 * scale_j;
        let i0 = (fi.floor() as usize).min(h - 2);
        let j0 = (fj.floor() as usize).min(w - 2);
        let di = fi - i0 as f64;
        let dj = fj - j0 as f64;
        // nested lerp form: exact for constant inputs
        let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
        let top = lerp(src[[i0, j0]], src[[i0, j0 + 1]], dj);
        let bot = lerp(src[[i0 + 1, j0]], src[[i0 + 1, j0 + 1]], dj);
        lerp(top, bot, di)
    })
}
