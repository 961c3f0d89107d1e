//! Datasets, the probe protocol, the enhancement loop and reporting.

pub mod config;
pub mod dataset;
pub mod probe;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, SyntheticConfig};
pub use dataset::{ingest, synth_dataset, write_bundle, DatasetBundle, SynthKind, SynthSpec};
pub use probe::{probe, ProbeReport, ProbeRow, Verdict};
pub use report::{export_report, export_sweep, RoundLog, RunReport, SelectedEdge, SweepRow};
pub use run::{budget_sweep, build_provider, rank_edges, run_lemp, run_plain, ProviderKind};
