//! Training runs: dataset -> pipeline -> model fitting -> checkpoint,
//! loss curve, and manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::Tensor;
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use chrono::Utc;
use ndarray::{Array2, Array3};

use super::config::ExperimentConfig;
use super::manifest::{code_version, RunManifest, RunSeeds, RunStatus, MANIFEST_SCHEMA_VERSION};
use crate::diffusion::{training_target, NoiseSchedule};
use crate::error::{Error, Result};
use crate::grid::SamplePair;
use crate::ingestion::{read_dataset_dir, RawRecord};
use crate::models::layers::{tensor_from_array2, tensor_from_array3, trainable_vars, WeightSource};
use crate::models::{
    save_checkpoint, BaselineKind, BaselineNet, BaselineSpec, CheckpointMeta, DenoiserNet,
    DenoiserSpec, ModelInstance, ModelKind, SeedRecord, SplitRecord, CHECKPOINT_FORMAT_TAG,
    CHECKPOINT_VERSION,
};
use crate::pipeline::{
    align, augment, clean, fit_norm, normalize_pair, resample, resample_pair, split,
    write_norm_stats, write_pairs_dir, write_split_file, AlignConfig, CleanConfig, NormStats,
    SplitOutcome,
};
use crate::rng::{derive_seed, rng_from_seed};

/// Result of the data-preparation stages shared by training and
/// evaluation: cleaned, aligned, resampled physical-unit pairs.
pub fn prepare_pairs(records: Vec<RawRecord>, config: &ExperimentConfig) -> Result<Vec<SamplePair>> {
    let cleaned = clean(
        records,
        &CleanConfig { max_bad_fraction: config.pipeline.clean_max_bad_fraction },
    )?;
    let (sat, era): (Vec<_>, Vec<_>) =
        cleaned.into_iter().partition(|r| r.variable == crate::grid::Channel::Satellite);
    let align_cfg = AlignConfig {
        tolerance: chrono::Duration::minutes(config.pipeline.align_tolerance_minutes),
    };
    let (pairs, _stats) = align(&sat, &era, &align_cfg)?;
    pairs.iter().map(|p| resample_pair(p, config.grid_size)).collect()
}

/// The normalized train/test material of a run.
pub struct PreparedSplit {
    pub train: Vec<SamplePair>,
    pub test: Vec<SamplePair>,
    pub stats: NormStats,
    pub outcome: SplitOutcome,
}

pub fn prepare_split(pairs: &[SamplePair], config: &ExperimentConfig) -> Result<PreparedSplit> {
    let outcome = split(pairs, config.pipeline.train_fraction, config.split_seed)?;
    outcome.audit()?;
    let stats = fit_norm(&outcome.train)?;
    let train = outcome
        .train
        .iter()
        .map(|p| normalize_pair(p, &stats))
        .collect::<Result<Vec<_>>>()?;
    let test = outcome
        .test
        .iter()
        .map(|p| normalize_pair(p, &stats))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedSplit { train, test, stats, outcome })
}

struct EpochStats {
    first: f64,
    last: f64,
    curve: Vec<(usize, usize, f64)>,
}

/// Trains the configured model and writes every run artifact. On a
/// divergence (non-finite loss) the manifest is still written, marked
/// failed.
pub fn train(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let run_dir = config.output_dir.clone();
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let started = Instant::now();

    let (records, _manifest) = read_dataset_dir(&config.dataset)?;
    let pairs = prepare_pairs(records, config)?;
    let prepared = prepare_split(&pairs, config)?;

    // persist the processed dataset: pairs, norm stats, split
    let processed = run_dir.join("processed");
    std::fs::create_dir_all(&processed).map_err(|e| Error::io(&processed, e))?;
    let mut all_pairs = prepared.train.clone();
    all_pairs.extend(prepared.test.iter().cloned());
    write_pairs_dir(&processed, &all_pairs)?;
    write_norm_stats(&processed.join("norm_stats"), &prepared.stats)?;
    write_split_file(&processed, &prepared.outcome)?;

    let outcome = fit_model(config, &prepared.train);
    let train_wall_secs = started.elapsed().as_secs_f64();

    let mut manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        created_utc: Utc::now(),
        code_version: code_version(),
        model: config.model,
        status: RunStatus::Succeeded,
        failure: None,
        config: config.snapshot_json()?,
        seeds: RunSeeds { train: config.train_seed, split: config.split_seed, eval: config.eval_seed },
        train_wall_secs,
        n_train_pairs: prepared.train.len(),
        n_test_pairs: prepared.test.len(),
        model_param_count: 0,
        first_epoch_mean_loss: None,
        final_epoch_mean_loss: None,
        checkpoint_path: None,
        loss_curve_path: None,
        metrics_path: None,
    };

    match outcome {
        Err(err) => {
            manifest.status = RunStatus::Failed;
            manifest.failure = Some(err.to_string());
            manifest.write(&run_dir)?;
            Err(err)
        }
        Ok((model, stats)) => {
            manifest.model_param_count = model.param_count();
            manifest.first_epoch_mean_loss = Some(stats.first);
            manifest.final_epoch_mean_loss = Some(stats.last);

            let curve_path = write_loss_curve(&run_dir, &stats.curve)?;
            manifest.loss_curve_path = Some(curve_path);

            let ckpt_dir = run_dir.join("checkpoint");
            let meta = CheckpointMeta {
                format_tag: CHECKPOINT_FORMAT_TAG.into(),
                version: CHECKPOINT_VERSION,
                model: config.model,
                grid_size: config.grid_size,
                channel_order: CheckpointMeta::channel_order_fixed(),
                denoiser: match &model {
                    ModelInstance::Cddpm { net, .. } => Some(net.spec().clone()),
                    _ => None,
                },
                baseline: match &model {
                    ModelInstance::Baseline(net) => Some(net.spec().clone()),
                    _ => None,
                },
                schedule: matches!(model, ModelInstance::Cddpm { .. })
                    .then_some(config.schedule),
                norm_stats: prepared.stats.clone(),
                train_config: config.snapshot_json()?,
                seeds: SeedRecord { train: config.train_seed, split: config.split_seed },
                split: SplitRecord {
                    train_typhoons: prepared.outcome.train_typhoons.clone(),
                    test_typhoons: prepared.outcome.test_typhoons.clone(),
                },
            };
            save_checkpoint(&ckpt_dir, &meta, &model)?;
            manifest.checkpoint_path = Some(ckpt_dir);
            manifest.write(&run_dir)?;
            Ok(manifest)
        }
    }
}

fn fit_model(
    config: &ExperimentConfig,
    train_pairs: &[SamplePair],
) -> Result<(ModelInstance, EpochStats)> {
    if train_pairs.is_empty() {
        return Err(Error::EmptyDataset("no training pairs".into()));
    }
    match config.model {
        ModelKind::Cddpm => fit_denoiser(config, train_pairs),
        ModelKind::Cnn | ModelKind::Senet => fit_baseline(config, train_pairs),
    }
}

fn fit_denoiser(
    config: &ExperimentConfig,
    train_pairs: &[SamplePair],
) -> Result<(ModelInstance, EpochStats)> {
    let spec = DenoiserSpec {
        grid_size: config.grid_size,
        base_width: config.model_params.base_width,
        depth: config.model_params.depth,
        gamma_embed_dim: config.model_params.gamma_embed_dim,
    };
    let net = DenoiserNet::new(spec, WeightSource::seeded(derive_seed(config.train_seed, "init", 0)))?;
    let schedule = NoiseSchedule::from_config(&config.schedule)?;
    let mut optimizer = AdamW::new(
        trainable_vars(net.vars()),
        ParamsAdamW { lr: config.optimizer.learning_rate, weight_decay: 0.0, ..Default::default() },
    )?;
    let mut noise_rng = rng_from_seed(derive_seed(config.train_seed, "noise", 0));

    let mut curve = Vec::new();
    let mut epoch_means = Vec::new();
    let mut step = 0usize;
    for epoch in 0..config.optimizer.epochs {
        let order = epoch_order(config, train_pairs.len(), epoch);
        let mut epoch_sum = 0.0;
        let mut epoch_n = 0usize;
        for chunk in order.chunks(config.optimizer.batch_size) {
            let mut conditions: Vec<Array2<f64>> = Vec::with_capacity(chunk.len());
            let mut noisies: Vec<Array3<f64>> = Vec::with_capacity(chunk.len());
            let mut epss: Vec<Array3<f64>> = Vec::with_capacity(chunk.len());
            let mut gammas: Vec<f64> = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let pair = maybe_augment(config, &train_pairs[idx], epoch, idx)?;
                let target = training_target(&pair.target_stack(), &schedule, &mut noise_rng)?;
                conditions.push(pair.condition.values.clone());
                noisies.push(target.y_t);
                epss.push(target.eps);
                gammas.push(target.gamma_bar);
            }
            let x = stack_conditions(&conditions, net.device())?;
            let y_t = stack_target_stacks(&noisies, net.device())?;
            let eps = stack_target_stacks(&epss, net.device())?;
            let loss = net.batch_loss(&x, &y_t, &gammas, &eps)?;
            let loss_value = loss.to_scalar::<f64>()?;
            if !loss_value.is_finite() {
                return Err(Error::NumericalFailure {
                    step: Some(step),
                    context: "training diverged (non-finite loss)".into(),
                });
            }
            optimizer.backward_step(&loss)?;
            curve.push((epoch, step, loss_value));
            epoch_sum += loss_value * chunk.len() as f64;
            epoch_n += chunk.len();
            step += 1;
        }
        epoch_means.push(epoch_sum / epoch_n as f64);
    }

    let stats = EpochStats {
        first: epoch_means[0],
        last: *epoch_means.last().unwrap(),
        curve,
    };
    Ok((ModelInstance::Cddpm { net, schedule }, stats))
}

fn fit_baseline(
    config: &ExperimentConfig,
    train_pairs: &[SamplePair],
) -> Result<(ModelInstance, EpochStats)> {
    let kind = match config.model {
        ModelKind::Cnn => BaselineKind::Cnn,
        ModelKind::Senet => BaselineKind::Senet,
        ModelKind::Cddpm => unreachable!("dispatched in fit_model"),
    };
    let spec = BaselineSpec {
        kind,
        grid_size: config.grid_size,
        base_width: config.model_params.base_width,
        se_reduction: config.model_params.se_reduction.min(config.model_params.base_width),
    };
    let net =
        BaselineNet::new(spec.clone(), WeightSource::seeded(derive_seed(config.train_seed, "init", 0)))?;
    let mut optimizer = AdamW::new(
        trainable_vars(net.vars()),
        ParamsAdamW { lr: config.optimizer.learning_rate, weight_decay: 0.0, ..Default::default() },
    )?;

    let mut curve = Vec::new();
    let mut epoch_means = Vec::new();
    let mut step = 0usize;
    for epoch in 0..config.optimizer.epochs {
        let order = epoch_order(config, train_pairs.len(), epoch);
        let mut epoch_sum = 0.0;
        let mut epoch_n = 0usize;
        for chunk in order.chunks(config.optimizer.batch_size) {
            let mut inputs: Vec<Array3<f64>> = Vec::with_capacity(chunk.len());
            let mut targets: Vec<Array3<f64>> = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let pair = maybe_augment(config, &train_pairs[idx], epoch, idx)?;
                inputs.push(baseline_input(&pair, spec.input_size())?);
                targets.push(pair.target_stack());
            }
            let x = stack_target_stacks(&inputs, net.device())?;
            let y = stack_target_stacks(&targets, net.device())?;
            let pred = net.forward(&x)?;
            let loss = candle_nn::loss::mse(&pred, &y)?;
            let loss_value = loss.to_scalar::<f64>()?;
            if !loss_value.is_finite() {
                return Err(Error::NumericalFailure {
                    step: Some(step),
                    context: "training diverged (non-finite loss)".into(),
                });
            }
            optimizer.backward_step(&loss)?;
            curve.push((epoch, step, loss_value));
            epoch_sum += loss_value * chunk.len() as f64;
            epoch_n += chunk.len();
            step += 1;
        }
        epoch_means.push(epoch_sum / epoch_n as f64);
    }

    let stats = EpochStats {
        first: epoch_means[0],
        last: *epoch_means.last().unwrap(),
        curve,
    };
    Ok((ModelInstance::Baseline(net), stats))
}

/// The baseline's network input: the (possibly augmented) condition
/// bilinearly reduced to grid_size/16 and replicated to four channels.
pub fn baseline_input(pair: &SamplePair, input_size: usize) -> Result<Array3<f64>> {
    let small = resample(&pair.condition, input_size)?;
    Ok(crate::models::replicate_channels(&small.values, 4))
}

fn maybe_augment(
    config: &ExperimentConfig,
    pair: &SamplePair,
    epoch: usize,
    idx: usize,
) -> Result<SamplePair> {
    if !config.augment.enabled {
        return Ok(pair.clone());
    }
    let seed = derive_seed(config.train_seed, "augment", (epoch as u64) << 32 | idx as u64);
    augment(pair, &config.augment.to_config(), seed)
}

fn epoch_order(config: &ExperimentConfig, n: usize, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(config.train_seed, "order", epoch as u64)));
    order
}

fn stack_conditions(items: &[Array2<f64>], device: &candle_core::Device) -> Result<Tensor> {
    let tensors = items
        .iter()
        .map(|a| Ok(tensor_from_array2(a, device)?.unsqueeze(0)?.unsqueeze(0)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tensor::cat(&tensors, 0)?)
}

fn stack_target_stacks(items: &[Array3<f64>], device: &candle_core::Device) -> Result<Tensor> {
    let tensors = items
        .iter()
        .map(|a| Ok(tensor_from_array3(a, device)?.unsqueeze(0)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tensor::cat(&tensors, 0)?)
}

fn write_loss_curve(run_dir: &Path, curve: &[(usize, usize, f64)]) -> Result<PathBuf> {
    let path = run_dir.join("loss_curve.csv");
    let mut text = String::from("epoch,step,loss\n");
    for (epoch, step, loss) in curve {
        text.push_str(&format!("{epoch},{step},{loss:?}\n"));
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
