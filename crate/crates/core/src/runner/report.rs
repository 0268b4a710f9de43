//! Cross-run reporting: the model-comparison table, wind-magnitude panels
//! (input image, ground-truth magnitude, one predicted magnitude per
//! model), and per-variable signed difference maps. Every figure is built
//! from the arrays persisted during evaluation plus each run's stored
//! normalization statistics; nothing is recomputed from model weights.

use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};

use super::evaluate::write_json;
use super::manifest::RunManifest;
use super::viz;
use crate::error::{Error, Result};
use crate::grid::{Channel, TARGET_CHANNELS};
use crate::metrics::{
    wind_magnitude_arrays, MetricsReport, MismatchReport, METRIC_COLUMNS,
};
use crate::pipeline::{read_norm_stats, NormStats};

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Number of test samples to render into panels and difference maps.
    pub n_samples: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { n_samples: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub comparison_csv: PathBuf,
    pub comparison_txt: PathBuf,
    pub mismatch_csv: PathBuf,
    pub magnitude_dir: PathBuf,
    pub difference_dir: PathBuf,
    /// Total number of magnitude tiles written (samples x (2 + models)).
    pub magnitude_tile_count: usize,
}

struct RunArtifacts {
    model: String,
    eval_dir: PathBuf,
    metrics: MetricsReport,
    mismatch: MismatchReport,
    norm_stats: NormStats,
}

/// Builds all report artifacts from one or more evaluated run directories.
pub fn report(run_dirs: &[PathBuf], out_dir: &Path, options: &ReportOptions) -> Result<ReportPaths> {
    if run_dirs.is_empty() {
        return Err(Error::EmptyDataset("report needs at least one run".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let runs: Vec<RunArtifacts> = run_dirs.iter().map(|d| load_run(d)).collect::<Result<_>>()?;

    let comparison_csv = out_dir.join("comparison.csv");
    write_comparison_csv(&comparison_csv, &runs)?;
    let comparison_txt = out_dir.join("comparison.txt");
    let mut table = String::new();
    for run in &runs {
        table.push_str(&super::evaluate::render_metrics_table(&run.model, &run.metrics));
        table.push('\n');
    }
    std::fs::write(&comparison_txt, table).map_err(|e| Error::io(&comparison_txt, e))?;
    let mismatch_csv = out_dir.join("mismatch_comparison.csv");
    write_mismatch_comparison(&mismatch_csv, &runs)?;

    let samples = common_samples(&runs, options.n_samples)?;
    let magnitude_dir = out_dir.join("magnitude");
    let mut magnitude_tile_count = 0;
    for ts in &samples {
        magnitude_tile_count += magnitude_panel(&runs, ts, &magnitude_dir)?;
    }
    let difference_dir = out_dir.join("difference");
    for ts in &samples {
        difference_maps(&runs, ts, &difference_dir)?;
    }

    Ok(ReportPaths {
        comparison_csv,
        comparison_txt,
        mismatch_csv,
        magnitude_dir,
        difference_dir,
        magnitude_tile_count,
    })
}

fn load_run(run_dir: &Path) -> Result<RunArtifacts> {
    let manifest = RunManifest::read(run_dir)?;
    let eval_dir = run_dir.join("eval");
    let metrics_path = eval_dir.join("metrics.json");
    if !metrics_path.exists() {
        return Err(Error::MissingArtifact(metrics_path));
    }
    let metrics: MetricsReport = serde_json::from_str(
        &std::fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?,
    )?;
    let mismatch_path = eval_dir.join("mismatch.json");
    if !mismatch_path.exists() {
        return Err(Error::MissingArtifact(mismatch_path));
    }
    let mismatch: MismatchReport = serde_json::from_str(
        &std::fs::read_to_string(&mismatch_path).map_err(|e| Error::io(&mismatch_path, e))?,
    )?;
    let norm_stats = read_norm_stats(&eval_dir.join("norm_stats"))?;
    Ok(RunArtifacts {
        model: manifest.model.name().to_string(),
        eval_dir,
        metrics,
        mismatch,
        norm_stats,
    })
}

fn write_comparison_csv(path: &Path, runs: &[RunArtifacts]) -> Result<()> {
    let mut text = format!("model,variable,{}\n", METRIC_COLUMNS.join(","));
    for run in runs {
        for ch in TARGET_CHANNELS {
            text.push_str(&row_csv(&run.model, ch.name(), run.metrics.row(ch)));
        }
        text.push_str(&row_csv(&run.model, "mean", &run.metrics.mean));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn row_csv(model: &str, var: &str, row: &crate::metrics::MetricRow) -> String {
    let v = row.values();
    format!(
        "{model},{var},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        v[0], v[1], v[2], v[3], v[4], v[5], v[6]
    )
}

fn write_mismatch_comparison(path: &Path, runs: &[RunArtifacts]) -> Result<()> {
    let mut text = String::from("model,u10,v10,sp,t2m,mean\n");
    for run in runs {
        let m = &run.mismatch;
        text.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            run.model, m.per_variable[0], m.per_variable[1], m.per_variable[2], m.per_variable[3], m.mean
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Timestamps (compact form) whose arrays exist in every run, oldest first.
fn common_samples(runs: &[RunArtifacts], n: usize) -> Result<Vec<String>> {
    let mut names: Option<Vec<String>> = None;
    for run in runs {
        let dir = run.eval_dir.join("arrays");
        let mut here: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.path().file_stem().map(|s| s.to_string_lossy().into_owned())
            })
            .collect();
        here.sort();
        names = Some(match names {
            None => here,
            Some(prev) => prev.into_iter().filter(|x| here.contains(x)).collect(),
        });
    }
    let mut names = names.unwrap_or_default();
    if names.is_empty() {
        return Err(Error::EmptyDataset("no common evaluated samples across runs".into()));
    }
    names.truncate(n);
    Ok(names)
}

struct SampleArrays {
    condition: Array2<f64>,
    truth: Array3<f64>,
    prediction: Array3<f64>,
}

fn load_arrays(eval_dir: &Path, ts: &str) -> Result<SampleArrays> {
    crate::ingestion::quiet_hdf5();
    let path = eval_dir.join("arrays").join(format!("{ts}.h5"));
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let file = hdf5::File::open(&path)?;
    Ok(SampleArrays {
        condition: file.dataset("condition")?.read_2d()?,
        truth: file.dataset("truth")?.read::<f64, ndarray::Ix3>()?,
        prediction: file.dataset("prediction")?.read::<f64, ndarray::Ix3>()?,
    })
}

/// Physical-unit wind magnitude from a normalized (4, H, W) stack.
fn magnitude_physical(stack: &Array3<f64>, stats: &NormStats) -> Result<Array2<f64>> {
    let denorm = |ch: Channel| -> Array2<f64> {
        let s = stats.get(ch);
        stack
            .index_axis(ndarray::Axis(0), ch.index())
            .mapv(|v| v * (s.max - s.min) + s.min)
    };
    wind_magnitude_arrays(&denorm(Channel::U10), &denorm(Channel::V10))
}

/// Signed prediction error in normalized units; identically zero for a
/// perfect prediction.
pub fn signed_difference(pred: &Array2<f64>, truth: &Array2<f64>) -> Array2<f64> {
    pred - truth
}

/// Renders one sample's panel. Returns the number of tiles written
/// (2 + number of models: input, ground-truth magnitude, one predicted
/// magnitude per model).
fn magnitude_panel(runs: &[RunArtifacts], ts: &str, dir: &Path) -> Result<usize> {
    let sample_dir = dir.join(ts);
    std::fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;

    let first = load_arrays(&runs[0].eval_dir, ts)?;
    let truth_mag = magnitude_physical(&first.truth, &runs[0].norm_stats)?;
    let mut model_mags: Vec<(String, Array2<f64>)> = Vec::with_capacity(runs.len());
    for run in runs {
        let arrays = load_arrays(&run.eval_dir, ts)?;
        model_mags.push((run.model.clone(), magnitude_physical(&arrays.prediction, &run.norm_stats)?));
    }
    let hi = model_mags
        .iter()
        .map(|(_, m)| m.iter().copied().fold(0.0f64, f64::max))
        .fold(truth_mag.iter().copied().fold(0.0f64, f64::max), f64::max)
        .max(1e-9);

    let mut tiles = Vec::new();
    let input_tile = viz::gray_image(&first.condition);
    viz::save_png(&input_tile, &sample_dir.join("tile_00_input.png"))?;
    tiles.push(input_tile);
    let truth_tile = viz::heatmap(&truth_mag, 0.0, hi);
    viz::save_png(&truth_tile, &sample_dir.join("tile_01_truth_magnitude.png"))?;
    tiles.push(truth_tile);
    for (k, (model, mag)) in model_mags.iter().enumerate() {
        let tile = viz::heatmap(mag, 0.0, hi);
        viz::save_png(&tile, &sample_dir.join(format!("tile_{:02}_{model}.png", k + 2)))?;
        tiles.push(tile);
    }
    viz::save_png(&viz::hstack(&tiles), &sample_dir.join("panel.png"))?;

    // data backing the figure
    crate::ingestion::quiet_hdf5();
    let data_path = sample_dir.join("magnitude.h5");
    let file = hdf5::File::create(&data_path)?;
    file.new_dataset_builder().with_data(&truth_mag).create("truth")?;
    for (model, mag) in &model_mags {
        file.new_dataset_builder().with_data(mag).create(model.as_str())?;
    }
    Ok(tiles.len())
}

fn difference_maps(runs: &[RunArtifacts], ts: &str, dir: &Path) -> Result<()> {
    let sample_dir = dir.join(ts);
    std::fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;
    crate::ingestion::quiet_hdf5();
    let data_path = sample_dir.join("difference.h5");
    let file = hdf5::File::create(&data_path)?;

    for ch in TARGET_CHANNELS {
        // shared color extent per variable across models
        let mut diffs: Vec<(String, Array2<f64>)> = Vec::new();
        let mut extent = 1e-9f64;
        for run in runs {
            let arrays = load_arrays(&run.eval_dir, ts)?;
            let d = signed_difference(
                &arrays.prediction.index_axis(ndarray::Axis(0), ch.index()).to_owned(),
                &arrays.truth.index_axis(ndarray::Axis(0), ch.index()).to_owned(),
            );
            extent = extent.max(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            diffs.push((run.model.clone(), d));
        }
        for (model, d) in &diffs {
            let img = viz::diverging_map(d, extent);
            viz::save_png(&img, &sample_dir.join(format!("{model}_{}.png", ch.name())))?;
            file.new_dataset_builder()
                .with_data(d)
                .create(format!("{model}_{}", ch.name()).as_str())?;
        }
    }
    Ok(())
}

/// Convenience wrapper writing the report summary next to the artifacts.
pub fn report_with_summary(
    run_dirs: &[PathBuf],
    out_dir: &Path,
    options: &ReportOptions,
) -> Result<ReportPaths> {
    let paths = report(run_dirs, out_dir, options)?;
    write_json(
        &out_dir.join("report.json"),
        &serde_json::json!({
            "runs": run_dirs,
            "magnitude_tile_count": paths.magnitude_tile_count,
            "columns": METRIC_COLUMNS,
        }),
    )?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn difference_of_perfect_prediction_is_zero() {
        let truth = array![[0.25, 0.5], [0.75, 1.0]];
        let diff = signed_difference(&truth.clone(), &truth);
        assert!(diff.iter().all(|&v| v == 0.0));
    }
}
