//! Command-line harness: dataset generation, tracking runs, evaluation and
//! provider comparison, plus every on-disk format they use.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 internal
//! invariant violation (see [`CliError::exit_code`]).

mod commands;
mod config;
mod dataset;
mod kv;
mod metrics;
mod tracks;

use std::path::Path;

use thiserror::Error;

pub use commands::{cmd_compare, cmd_eval, cmd_gen, cmd_track, run_tracker, CompareReport};
pub use config::{dump_config, parse_config, parse_config_str, ProviderKind, RunConfig};
pub use dataset::{
    dump_sequence_spec, parse_sequence_spec, parse_sequence_spec_str, read_pgm, write_pgm, Dataset,
};
pub use metrics::{FrameMetrics, Metrics, Summary};
pub use tracks::{
    fmt_decimal, read_events, read_timings, read_tracks, write_events, write_timings, write_tracks,
    EventRow, EventStage, TimingRow, TrackRow,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}:{line}: {message}")]
    ConfigLine {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigLine { .. } | CliError::Config { .. } => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
