//! Dataset ingestion, run configuration and result files.

mod config;
mod data;
mod export;

pub use config::{GridSpec, Mode, PriorRule, ResolvedRun, RunConfig, V0Base, RUN_CONFIG_SCHEMA};
pub use data::{load_dataset, parse_dataset_csv, LoadedDataset};
pub use export::{export_results, load_results, ResultsRecord, COMPONENT_FIGURE_FILE, FIGURE_FILE, RESULTS_CSV, RESULTS_JSON};
