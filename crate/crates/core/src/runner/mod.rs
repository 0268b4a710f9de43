//! Experiment orchestration: configuration, training, evaluation,
//! reporting, and the run manifest that makes every reported number
//! traceable.

mod config;
mod evaluate;
mod manifest;
mod report;
mod sample_cmd;
mod train;
pub mod viz;

pub use config::{
    AugmentSection, ExperimentConfig, ModelParams, OptimizerConfig, PipelineSection,
    CONFIG_SCHEMA_VERSION, ENV_OUTPUT_DIR, ENV_SEED,
};
pub use evaluate::{
    evaluate, render_metrics_table, write_metrics_csv, write_mismatch_csv, EvalOptions,
    EvalOutcome, EvalSummary,
};
pub use manifest::{code_version, RunManifest, RunSeeds, RunStatus, MANIFEST_SCHEMA_VERSION};
pub use report::{report, report_with_summary, signed_difference, ReportOptions, ReportPaths};
pub use sample_cmd::{sample_fields, SampleOutput};
pub use train::{baseline_input, prepare_pairs, prepare_split, train, PreparedSplit};
