//! Experiment harness: configuration files, seeded multi-trial runs and
//! schema-versioned result tables.

pub mod manifest;
pub mod results;
pub mod run;
pub mod selftest;
pub mod spec;

pub use manifest::{canonical_config, config_hash, RunManifest};
pub use results::{decode, emit_results, encode, read_results, Format, ResultRow, ResultTable, SCHEMA_VERSION, STATISTICS};
pub use run::{
    experiment_schemes, run_experiment, statistics, trial_seed, DeploymentRecord, ExperimentOutput, RunOptions,
    SlotLogEntry,
};
pub use spec::{load_config, parse_config, ConfigFile, Experiment, ExperimentSpec, SweepPoint, SweepSpec};
pub use selftest::{run_selftest, Check};
