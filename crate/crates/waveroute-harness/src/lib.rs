//! Experiment harness for the waveroute simulator: experiment files, seeded
//! fan-out over benchmark cells, paradox checks, steering sweeps, and the
//! CSV formats the results ship in.

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{default_metric_mode, parse_config, ExperimentConfig};
pub use experiment::{
    braess_check, regime_string, run_experiment, run_seed, steering_sweep, BraessFinding,
    BraessSummary, ExperimentReport, ReportRow,
};
pub use report::{
    read_report_csv, report_to_csv_string, write_decision_log_csv, write_report_csv,
    write_trace_csv, DecisionLogRow, DecisionLogger, TraceLogger, REPORT_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error("experiment {label:?}: {message}")]
    InvalidExperiment { label: String, message: String },
    #[error("experiment {label:?}: steering sweep needs the mb policy enabled")]
    SweepNeedsMemoryBased { label: String },
    #[error("csv record {record}: {message}")]
    CsvField { record: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
