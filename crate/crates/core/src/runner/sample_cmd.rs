//! Single-image sampling: load a checkpoint, read a satellite image from a
//! frame container (physical units) or a PNG (already display-normalized),
//! and emit the four predicted fields plus rendered previews.

use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::grid::{Channel, FieldGrid, TARGET_CHANNELS};
use crate::metrics::wind_magnitude_arrays;
use crate::models::load_checkpoint;
use crate::pipeline::{normalize, resample, NormStats};
use crate::rng::rng_from_seed;

pub struct SampleOutput {
    pub fields_path: PathBuf,
    pub prediction: Array3<f64>,
}

/// Runs one seeded prediction for a single input image and writes
/// `fields.h5` (normalized + physical-unit stacks), per-variable heatmaps,
/// and the wind-magnitude rendering.
pub fn sample_fields(
    checkpoint_dir: &Path,
    input: &Path,
    seed: u64,
    out_dir: &Path,
) -> Result<SampleOutput> {
    let (meta, model) = load_checkpoint(checkpoint_dir)?;
    let condition = load_condition(input, &meta.norm_stats)?;
    let condition = resample(&condition, meta.grid_size)?;

    let mut rng = rng_from_seed(seed);
    let prediction = model.predict(&condition.values, &mut rng)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    crate::ingestion::quiet_hdf5();
    let fields_path = out_dir.join("fields.h5");
    let file = hdf5::File::create(&fields_path)?;
    file.new_dataset_builder().with_data(&condition.values).create("condition")?;
    file.new_dataset_builder().with_data(&prediction).create("prediction_normalized")?;

    let mut physical = prediction.clone();
    for ch in TARGET_CHANNELS {
        let s = meta.norm_stats.get(ch);
        physical
            .index_axis_mut(ndarray::Axis(0), ch.index())
            .mapv_inplace(|v| v * (s.max - s.min) + s.min);
    }
    file.new_dataset_builder().with_data(&physical).create("prediction_physical")?;

    for ch in TARGET_CHANNELS {
        let grid = prediction.index_axis(ndarray::Axis(0), ch.index()).to_owned();
        let img = super::viz::heatmap(&grid, 0.0, 1.0);
        super::viz::save_png(&img, &out_dir.join(format!("{}.png", ch.name())))?;
    }
    let magnitude = wind_magnitude_arrays(
        &physical.index_axis(ndarray::Axis(0), 0).to_owned(),
        &physical.index_axis(ndarray::Axis(0), 1).to_owned(),
    )?;
    let hi = magnitude.iter().copied().fold(1e-9f64, f64::max);
    super::viz::save_png(
        &super::viz::heatmap(&magnitude, 0.0, hi),
        &out_dir.join("magnitude.png"),
    )?;

    Ok(SampleOutput { fields_path, prediction })
}

/// A `.h5` frame carries physical brightness and is normalized with the
/// checkpoint statistics; a PNG is taken as already normalized (pixel/255).
fn load_condition(input: &Path, stats: &NormStats) -> Result<FieldGrid> {
    match input.extension().and_then(|e| e.to_str()) {
        Some("h5") => {
            crate::ingestion::quiet_hdf5();
            let file = hdf5::File::open(input)?;
            let values: Array2<f64> = file.dataset("satellite")?.read_2d()?;
            let grid = FieldGrid::new(values, Channel::Satellite, false);
            normalize(&grid, stats)
        }
        Some("png") => {
            let img = image::open(input)
                .map_err(|e| Error::Domain(format!("reading {}: {e}", input.display())))?
                .to_luma8();
            let (w, h) = img.dimensions();
            let values = Array2::from_shape_fn((h as usize, w as usize), |(i, j)| {
                f64::from(img.get_pixel(j as u32, i as u32).0[0]) / 255.0
            });
            Ok(FieldGrid::new(values, Channel::Satellite, true))
        }
        _ => Err(Error::Domain(format!(
            "unsupported input {} (expected .h5 frame or .png)",
            input.display()
        ))),
    }
}
