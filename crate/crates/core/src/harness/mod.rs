//! End-to-end run orchestration: config, pair generation, cached scoring
//! with bounded concurrency, metric computation, and report emission.

pub mod config;
pub mod report;
pub mod run;

pub use config::{
    BackendConfig, BackendKind, CorpusConfig, InputHashes, MetricKind, MetricsConfig, RunConfig,
    TokenizerConfig,
};
pub use report::{
    compare, emit_comparison, emit_report, Comparison, DropCounts, EvalReport, RadarAxis,
    RadarBlock, ReportBody, Timing,
};
pub use run::{entropy_run, run, transform_dry_run, EntropyReport};

use std::path::PathBuf;

use crate::backend::BackendError;
use crate::corpus::CorpusError;
use crate::metrics::MetricError;
use crate::tokenizer::TokenizerError;
use crate::transforms::TransformError;
use crate::wordlist::WordListError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("metric {metric} cannot run against backend {backend}: missing {what}")]
    CapabilityMismatch {
        metric: String,
        backend: String,
        what: String,
    },
    #[error("metric {metric}: {dropped} of {total} scored pairs were non-finite (limit 1%)")]
    TooManyNonFinite {
        metric: String,
        dropped: usize,
        total: usize,
    },
    #[error("metric {metric} failed: {source}")]
    Metric {
        metric: String,
        #[source]
        source: MetricError,
    },
    #[error("reports are not comparable: {field} differs ({left} vs {right})")]
    NotComparable {
        field: String,
        left: String,
        right: String,
    },
    #[error("need at least two reports to compare, got {0}")]
    TooFewReports(usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    WordList(#[from] WordListError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
