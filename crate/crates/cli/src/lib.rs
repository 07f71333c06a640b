//! Experiment orchestration around the `mwem` library: CSV ingestion,
//! seeded repetitions, sweeps, result files and synthetic-data export.

pub mod bench;
pub mod config;
pub mod error;
pub mod experiment;
pub mod ingest;

pub use config::{
    Algorithm, ExperimentConfig, ExportFormat, ExportSpec, Mode, SweepSpec, SyntheticSpec,
    WorkloadSpec,
};
pub use error::{CliError, Result};
pub use experiment::{export_synthetic, run_experiment, run_sweep, ExperimentSummary};
pub use ingest::{infer_schema, ingest_csv, ingest_weighted, AttributeDecl, SchemaDecl};
