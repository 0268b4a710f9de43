//! Command-line interface: dataset ingestion, synthetic data generation,
//! training, evaluation, reporting, and single-image sampling.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stormfield::error::Result;
use stormfield::geo::GeoWindow;
use stormfield::grid::TARGET_CHANNELS;
use stormfield::ingestion::{
    read_digital_typhoon, read_era5, synth_dataset, write_dataset_dir, FrameFilter,
};
use stormfield::runner::{
    evaluate, report_with_summary, sample_fields, train, EvalOptions, ExperimentConfig,
    ReportOptions,
};

#[derive(Parser)]
#[command(name = "stormfield", version, about = "Conditional diffusion from typhoon imagery to surface meteorological fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read reanalysis and satellite containers into a dataset directory.
    Ingest {
        /// Directory of gridded reanalysis container files (.h5/.nc).
        #[arg(long)]
        era5_dir: PathBuf,
        /// Directory of per-typhoon satellite frame directories.
        #[arg(long)]
        dt_dir: PathBuf,
        /// Region of interest as lat0,lat1,lon0,lon1 (default: the Taiwan box).
        #[arg(long)]
        window: Option<String>,
        /// Keep frames whose center lies inside the window instead of any overlap.
        #[arg(long)]
        center_filter: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a TOML experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset's test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Base seed for the per-item stochastic draws.
        #[arg(long)]
        seed: Option<u64>,
        /// Stochastic draws averaged per test item.
        #[arg(long)]
        n_draws: Option<usize>,
        /// Must match the checkpoint grid size when given.
        #[arg(long)]
        grid_size: Option<usize>,
    },
    /// Build comparison tables, magnitude panels and difference maps from
    /// evaluated runs.
    Report {
        /// Run directories (each holding manifest.json and eval/).
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Test samples to render.
        #[arg(long, default_value_t = 4)]
        samples: usize,
    },
    /// Predict the four fields for a single satellite image.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input image: a .h5 frame (physical units) or a .png.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sample-out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { era5_dir, dt_dir, window, center_filter, out } => {
            let window = match window {
                Some(s) => GeoWindow::parse(&s)?,
                None => GeoWindow::default(),
            };
            let filter =
                if center_filter { FrameFilter::CenterInWindow } else { FrameFilter::Intersects };

            let mut records = Vec::new();
            let mut era5_files: Vec<PathBuf> = std::fs::read_dir(&era5_dir)
                .map_err(|e| stormfield::Error::io(&era5_dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().is_some_and(|x| x == "h5" || x == "nc" || x == "nc4")
                })
                .collect();
            era5_files.sort();
            for file in &era5_files {
                records.extend(read_era5(file, &window, &TARGET_CHANNELS)?);
            }
            let (sat, diags) = read_digital_typhoon(&dt_dir, &window, filter)?;
            records.extend(sat);
            write_dataset_dir(&out, &records, &window)?;
            println!(
                "ingested {} records ({} frames read, {} skipped, {} dirty) -> {}",
                records.len(),
                diags.read,
                diags.skipped,
                diags.dirty,
                out.display()
            );
            Ok(())
        }
        Command::Synth { n, size, seed, out } => {
            let records = synth_dataset(n, size, seed)?;
            write_dataset_dir(&out, &records, &GeoWindow::default())?;
            println!("wrote {n} synthetic samples ({size}x{size}, seed {seed}) -> {}", out.display());
            Ok(())
        }
        Command::Train { config } => {
            let config = ExperimentConfig::load(&config)?;
            let manifest = train(&config)?;
            println!(
                "trained {} in {:.1}s: epoch-mean loss {:.6} -> {:.6}; checkpoint {}",
                manifest.model.name(),
                manifest.train_wall_secs,
                manifest.first_epoch_mean_loss.unwrap_or(f64::NAN),
                manifest.final_epoch_mean_loss.unwrap_or(f64::NAN),
                manifest
                    .checkpoint_path
                    .as_deref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            );
            Ok(())
        }
        Command::Evaluate { checkpoint, data, out, seed, n_draws, grid_size } => {
            let outcome = evaluate(
                &checkpoint,
                &data,
                &out,
                &EvalOptions { seed, n_draws, grid_size },
            )?;
            print!("{}", stormfield::runner::render_metrics_table("model", &outcome.metrics));
            println!(
                "evaluated {} test items (seed {}, {} draw(s)) -> {}",
                outcome.summary.n_test_items,
                outcome.summary.eval_seed,
                outcome.summary.n_draws,
                out.display()
            );
            Ok(())
        }
        Command::Report { runs, out, samples } => {
            let paths = report_with_summary(&runs, &out, &ReportOptions { n_samples: samples })?;
            println!(
                "report written: {} ({} magnitude tiles)",
                paths.comparison_csv.display(),
                paths.magnitude_tile_count
            );
            Ok(())
        }
        Command::Sample { checkpoint, input, seed, out } => {
            let output = sample_fields(&checkpoint, &input, seed, &out)?;
            println!("fields written to {}", output.fields_path.display());
            Ok(())
        }
    }
}
