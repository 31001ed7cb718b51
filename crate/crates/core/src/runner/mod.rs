//! Query execution behind a pluggable driver interface.
//!
//! Only the embedded SQLite adapter ships with the crate. Warehouse drivers
//! plug in by implementing [`Driver`] and [`Connection`].

mod fixture;
mod pool;
mod preview;
mod sqlite;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{ResultTable, TableSchema};

pub use fixture::{seed_fixture, FixtureFile, RetailFixture};
pub use pool::{ConnectionPool, PooledConnection};
pub use preview::{preview, ResultPreview, PREVIEW_ROWS};
pub use sqlite::SqliteDriver;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Result of running one statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecutionOutcome {
    Success { table: ResultTable, duration_secs: f64 },
    EngineError { message: String, duration_secs: f64 },
    Timeout { limit_secs: f64 },
}

impl ExecutionOutcome {
    /// A successful execution that returned at least one row.
    pub fn has_rows(&self) -> bool {
        matches!(self, ExecutionOutcome::Success { table, .. } if table.row_count() > 0)
    }

    pub fn table(&self) -> Option<&ResultTable> {
        match self {
            ExecutionOutcome::Success { table, .. } => Some(table),
            _ => None,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        match self {
            ExecutionOutcome::Success { duration_secs, .. }
            | ExecutionOutcome::EngineError { duration_secs, .. } => *duration_secs,
            ExecutionOutcome::Timeout { limit_secs } => *limit_secs,
        }
    }

    /// Short description of why this outcome is not a usable result, if it is not.
    pub fn failure_reason(&self) -> Option<String> {
        match self {
            ExecutionOutcome::Success { table, .. } if table.row_count() == 0 => {
                Some("query returned no rows".to_string())
            }
            ExecutionOutcome::Success { .. } => None,
            ExecutionOutcome::EngineError { message, .. } => Some(message.clone()),
            ExecutionOutcome::Timeout { limit_secs } => Some(format!("query timed out after {limit_secs}s")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("cannot open {url}: {message}")]
    Open { url: String, message: String },
    #[error("unsupported connection url {0:?}")]
    UnsupportedUrl(String),
    #[error("timeout must be positive")]
    InvalidTimeout,
    #[error("fixture file {file} failed: {message}")]
    Fixture { file: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("engine error: {0}")]
    Engine(String),
}

/// Opens connections from a URL string.
pub trait Driver: Send + Sync {
    fn open(&self, url: &str) -> Result<Box<dyn Connection>, RunnerError>;
}

/// A single-owner database session.
pub trait Connection: Send {
    /// Runs one read-only statement and fully materializes its result.
    ///
    /// Engine failures are reported in the outcome; only a lost connection is an `Err`.
    fn execute(&mut self, sql: &str, timeout: Duration) -> Result<ExecutionOutcome, RunnerError>;

    /// Runs a script of DDL/DML statements with no result.
    fn execute_script(&mut self, sql: &str) -> Result<(), RunnerError>;

    /// Tables and columns visible on this connection, in creation order.
    fn describe_schema(&mut self) -> Result<Vec<TableSchema>, RunnerError>;

    fn close(self: Box<Self>) -> Result<(), RunnerError>;
}

/// Anything that can run a query to completion, e.g. a [`ConnectionPool`].
pub trait QueryExecutor: Send + Sync {
    fn run(&self, sql: &str) -> Result<ExecutionOutcome, RunnerError>;
}
