//! Experiment orchestration: configuration, reproducible parallel Monte
//! Carlo, result tables, convergence verdicts, and shipped presets.
//!
//! Replicates draw from ChaCha streams keyed by (grid cell, replicate
//! index) under a single master seed, and aggregation sorts samples before
//! summarizing, so a (config, seed) pair produces byte-identical artifacts
//! at any thread count.

mod config;
mod experiment;
mod presets;
mod report;

pub use config::{
    resolve_out_dir, ExperimentConfig, GridSpec, OpKind, StatTolerance, CONFIG_SCHEMA_VERSION,
    OUT_DIR_ENV,
};
pub use experiment::{
    compute_table, read_artifact, run_experiment, sample_fixation_pair, write_table_csv,
    ExperimentRun, ResultRow, ResultTable, RunArtifact, TABLE_CSV_VERSION, TABLE_SCHEMA_VERSION,
};
pub use presets::{preset, PRESET_NAMES};
pub use report::{all_gates_pass, convergence_report, Verdict};
