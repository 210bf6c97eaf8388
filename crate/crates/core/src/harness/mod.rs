//! Configuration, metrics, reports and experiment drivers.

pub mod config;
pub mod experiments;
pub mod metrics;
pub mod pipeline;
pub mod report;

use thiserror::Error;

pub use config::{AgentConfig, ClassifierChoice, CorpusConfig, DynamicConfig, ExperimentConfig, OpenSetConfig};
pub use experiments::{
    prepare_open_set, run_active_trials, run_closed_set, run_dynamic_comparison,
    run_open_set_trials, ActiveReport, ActiveRow, ClosedRow, ClosedSetReport, DynamicReport,
    DynamicTrial, OpenSetReport, OpenSetTrial, OpenSetup,
};
pub use metrics::{average_precision, compute_metrics, mean_std, MetricsFragment, Prediction};
pub use report::{csv_body, CsvTable, ReportHeader};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("experiment needs at least {needed} classes, corpus has {found}")]
    TooFewClasses { needed: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Pbmf(#[from] crate::pbmf::PbmfError),
    #[error(transparent)]
    Detector(#[from] crate::detector::DetectorError),
    #[error(transparent)]
    Fusion(#[from] crate::fusion::FusionError),
    #[error(transparent)]
    OpenSet(#[from] crate::openset::OpenSetError),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
