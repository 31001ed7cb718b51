//! Domain types shared by every other module.

mod cell;
mod record;
mod schema;
mod table;

use std::path::Path;

pub use cell::{canonicalize_cell, CellValue, Decimal, RawValue};
pub use record::{read_records, validate_families, write_jsonl, QuestionRecord, Split, MAX_FAMILY_SIZE};
pub use schema::{ColumnSchema, DialectTag, SchemaDescriptor, TableSchema};
pub use table::{infer_csv_cell, Column, ResultTable};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unrepresentable value of engine type {engine_type}: {detail}")]
    UnrepresentableValue { engine_type: String, detail: String },
    #[error("column {column:?} has {found} cells, expected {expected}")]
    RaggedColumn {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("family invariant violated: {0}")]
    FamilyViolation(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
