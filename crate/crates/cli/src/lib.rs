//! Command implementations behind the `quantprobe` binary.
//!
//! Commands communicate only through files: `track` writes statistics
//! snapshots, `probe` turns snapshots into a report, `dispatch` turns a
//! report into a plan, `report` renders either for humans and spreadsheets.

pub mod commands;
pub mod config;
pub mod tabular;
pub mod throughput_table;

use quantprobe_core::Error;

/// Process-level error classes; each maps to a fixed exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit 1).
    Usage(String),
    /// Unreadable, corrupt or mismatched data files (exit 2).
    Data(String),
    /// Numerical failure such as a non-factorizable covariance (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotPositiveDefinite { .. }
            | Error::NonFiniteInput(_)
            | Error::InsufficientSamples { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

/// Timestamp for provenance fields: honors `SOURCE_DATE_EPOCH` so builds
/// and tests can pin it, falling back to the wall clock.
pub fn provenance_timestamp() -> u64 {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(secs) = v.parse::<u64>() {
            return secs;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
