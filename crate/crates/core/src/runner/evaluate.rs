//! Evaluation runs: checkpoint + dataset -> test-split predictions ->
//! metric and mismatch reports, with every prediction persisted so reports
//! are recomputable without rerunning anything.

use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::prepare_pairs;
use crate::error::{Error, Result};
use crate::grid::SamplePair;
use crate::ingestion::read_dataset_dir;
use crate::metrics::{
    evaluate_sets, mismatch_sets, MetricsReport, MismatchReport, RandomConvFeatures,
    METRIC_COLUMNS,
};
use crate::models::{load_checkpoint, CheckpointMeta, ModelInstance};
use crate::pipeline::{normalize_pair, write_norm_stats};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Base seed for the per-item stochastic draws; defaults to the
    /// checkpoint's recorded eval seed.
    pub seed: Option<u64>,
    /// Stochastic draws averaged per test item; defaults to the config's.
    pub n_draws: Option<usize>,
    /// When given, must match the checkpoint grid size (refused otherwise).
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub eval_seed: u64,
    pub n_draws: usize,
    pub n_test_items: usize,
    pub metrics_path: PathBuf,
    pub mismatch_path: PathBuf,
}

pub struct EvalOutcome {
    pub metrics: MetricsReport,
    pub mismatch: MismatchReport,
    pub summary: EvalSummary,
}

/// Runs the full evaluation. The test split is reconstructed from the
/// typhoon ids stored in the checkpoint, normalization uses the stored
/// training statistics, and the diffusion model draws one (or `n_draws`)
/// seeded samples per item while baselines run deterministically.
pub fn evaluate(
    checkpoint_dir: &Path,
    data_dir: &Path,
    out_dir: &Path,
    options: &EvalOptions,
) -> Result<EvalOutcome> {
    let (meta, model) = load_checkpoint(checkpoint_dir)?;
    if let Some(requested) = options.grid_size {
        if requested != meta.grid_size {
            return Err(Error::CheckpointMismatch(format!(
                "requested grid size {requested} but the checkpoint was trained at {}",
                meta.grid_size
            )));
        }
    }

    let config = config_from_meta(&meta, data_dir)?;
    let (records, _) = read_dataset_dir(data_dir)?;
    let pairs = prepare_pairs(records, &config)?;
    let test_pairs = select_test_pairs(&pairs, &meta)?;
    let test_norm: Vec<SamplePair> = test_pairs
        .iter()
        .map(|p| normalize_pair(p, &meta.norm_stats))
        .collect::<Result<Vec<_>>>()?;

    let eval_seed = options.seed.unwrap_or(config.eval_seed);
    let n_draws = options.n_draws.unwrap_or(config.n_draws).max(1);

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let arrays_dir = out_dir.join("arrays");
    std::fs::create_dir_all(&arrays_dir).map_err(|e| Error::io(&arrays_dir, e))?;

    let mut preds: Vec<Array3<f64>> = Vec::with_capacity(test_norm.len());
    let mut truths: Vec<Array3<f64>> = Vec::with_capacity(test_norm.len());
    for (i, pair) in test_norm.iter().enumerate() {
        let pred = predict_average(&model, pair, eval_seed, i as u64, n_draws)?;
        let truth = pair.target_stack();
        write_arrays_file(&arrays_dir, pair, &pred, &truth)?;
        preds.push(pred);
        truths.push(truth);
    }

    let extractor = RandomConvFeatures::default();
    let metrics = evaluate_sets(&preds, &truths, &extractor)?;
    let mismatch = mismatch_sets(&preds, &truths, config.pipeline.mismatch_threshold)?;

    let metrics_path = out_dir.join("metrics.json");
    write_json(&metrics_path, &metrics)?;
    let mismatch_path = out_dir.join("mismatch.json");
    write_json(&mismatch_path, &mismatch)?;
    write_metrics_csv(&out_dir.join("metrics.csv"), meta.model.name(), &metrics)?;
    write_mismatch_csv(&out_dir.join("mismatch.csv"), meta.model.name(), &mismatch)?;
    std::fs::write(
        out_dir.join("metrics.txt"),
        render_metrics_table(meta.model.name(), &metrics),
    )
    .map_err(|e| Error::io(out_dir, e))?;
    write_norm_stats(&out_dir.join("norm_stats"), &meta.norm_stats)?;

    let summary = EvalSummary {
        checkpoint: checkpoint_dir.to_path_buf(),
        dataset: data_dir.to_path_buf(),
        eval_seed,
        n_draws,
        n_test_items: test_norm.len(),
        metrics_path,
        mismatch_path,
    };
    write_json(&out_dir.join("eval.json"), &summary)?;
    Ok(EvalOutcome { metrics, mismatch, summary })
}

/// Rebuilds the pipeline parameters the checkpoint was trained under; when
/// the snapshot is absent (foreign checkpoint) defaults apply.
fn config_from_meta(meta: &CheckpointMeta, data_dir: &Path) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = match serde_json::from_value(meta.train_config.clone()) {
        Ok(c) => c,
        Err(_) => ExperimentConfig::template(
            data_dir.to_path_buf(),
            meta.model,
            std::env::temp_dir(),
        ),
    };
    config.dataset = data_dir.to_path_buf();
    config.grid_size = meta.grid_size;
    config.model = meta.model;
    Ok(config)
}

/// The test split is exactly the stored typhoon-id list; the leakage audit
/// re-checks disjointness at run start.
fn select_test_pairs(pairs: &[SamplePair], meta: &CheckpointMeta) -> Result<Vec<SamplePair>> {
    for id in &meta.split.test_typhoons {
        if meta.split.train_typhoons.contains(id) {
            return Err(Error::CannotSplit(format!(
                "typhoon {id} appears in both stored split sides"
            )));
        }
    }
    let test: Vec<SamplePair> = pairs
        .iter()
        .filter(|p| meta.split.test_typhoons.contains(&p.typhoon_id))
        .cloned()
        .collect();
    if test.is_empty() {
        return Err(Error::EmptyDataset(
            "dataset has no pairs from the checkpoint's test typhoons".into(),
        ));
    }
    Ok(test)
}

fn predict_average(
    model: &ModelInstance,
    pair: &SamplePair,
    eval_seed: u64,
    item: u64,
    n_draws: usize,
) -> Result<Array3<f64>> {
    let (h, w) = pair.grid_shape();
    let mut acc = Array3::<f64>::zeros((4, h, w));
    for draw in 0..n_draws {
        let seed = derive_seed(eval_seed, "draw", item << 16 | draw as u64);
        let mut rng = rng_from_seed(seed);
        acc = acc + model.predict(&pair.condition.values, &mut rng)?;
    }
    Ok(acc / n_draws as f64)
}

fn write_arrays_file(
    arrays_dir: &Path,
    pair: &SamplePair,
    pred: &Array3<f64>,
    truth: &Array3<f64>,
) -> Result<()> {
    crate::ingestion::quiet_hdf5();
    let path = arrays_dir.join(format!("{}.h5", pair.timestamp.format("%Y%m%dT%H%M%SZ")));
    let file = hdf5::File::create(&path)?;
    file.new_attr::<i64>().create("time")?.write_scalar(&pair.timestamp.timestamp())?;
    let ty: hdf5::types::VarLenUnicode = pair
        .typhoon_id
        .parse()
        .map_err(|_| Error::Domain("typhoon id is not valid unicode".into()))?;
    file.new_attr::<hdf5::types::VarLenUnicode>()
        .create("typhoon_id")?
        .write_scalar(&ty)?;
    file.new_dataset_builder().with_data(&pair.condition.values).create("condition")?;
    file.new_dataset_builder().with_data(pred).create("prediction")?;
    file.new_dataset_builder().with_data(truth).create("truth")?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Machine-readable table: one row per variable plus the mean row, columns
/// in the fixed order.
pub fn write_metrics_csv(path: &Path, model: &str, report: &MetricsReport) -> Result<()> {
    let mut text = format!("model,variable,{}\n", METRIC_COLUMNS.join(","));
    for ch in crate::grid::TARGET_CHANNELS {
        text.push_str(&metric_csv_row(model, ch.name(), report.row(ch)));
    }
    text.push_str(&metric_csv_row(model, "mean", &report.mean));
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn metric_csv_row(model: &str, var: &str, row: &crate::metrics::MetricRow) -> String {
    let v = row.values();
    format!(
        "{model},{var},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        v[0], v[1], v[2], v[3], v[4], v[5], v[6]
    )
}

pub fn write_mismatch_csv(path: &Path, model: &str, report: &MismatchReport) -> Result<()> {
    let mut text = String::from("model,u10,v10,sp,t2m,mean\n");
    text.push_str(&format!(
        "{model},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
        report.per_variable[0],
        report.per_variable[1],
        report.per_variable[2],
        report.per_variable[3],
        report.mean
    ));
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn render_metrics_table(model: &str, report: &MetricsReport) -> String {
    let mut out = format!(
        "{:<8} {:<9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "model",
        "variable",
        METRIC_COLUMNS[0],
        METRIC_COLUMNS[1],
        METRIC_COLUMNS[2],
        METRIC_COLUMNS[3],
        METRIC_COLUMNS[4],
        METRIC_COLUMNS[5],
        METRIC_COLUMNS[6],
    );
    let mut push_row = |var: &str, row: &crate::metrics::MetricRow| {
        let v = row.values();
        out.push_str(&format!(
            "{:<8} {:<9} {:>9.4} {:>9.4} {:>9.4} {:>9.3} {:>9.4} {:>9.4} {:>9.4}\n",
            model, var, v[0], v[1], v[2], v[3], v[4], v[5], v[6]
        ));
    };
    for ch in crate::grid::TARGET_CHANNELS {
        push_row(ch.name(), report.row(ch));
    }
    push_row("mean", &report.mean);
    out
}
