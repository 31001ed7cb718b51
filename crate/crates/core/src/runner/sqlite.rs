use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{ErrorCode, OpenFlags};

use super::{Connection, Driver, ExecutionOutcome, RunnerError};
use crate::model::{canonicalize_cell, Column, ColumnSchema, RawValue, ResultTable, TableSchema};

/// Embedded engine adapter.
///
/// Accepted URLs:
/// - `sqlite::memory:` a private in-memory database per connection
/// - `sqlite::memory:<name>` a named in-memory database shared by every
///   connection opened with the same name in this process
/// - `sqlite://<path>` or `sqlite:<path>` a database file
#[derive(Debug, Default, Clone, Copy)]
pub struct SqliteDriver;

static PRIVATE_DB_COUNTER: AtomicU64 = AtomicU64::new(0);

impl Driver for SqliteDriver {
    fn open(&self, url: &str) -> Result<Box<dyn Connection>, RunnerError> {
        let open_err = |e: rusqlite::Error| RunnerError::Open {
            url: url.to_string(),
            message: e.to_string(),
        };
        let flags = OpenFlags::SQLITE_OPEN_READ_WRITE
            | OpenFlags::SQLITE_OPEN_CREATE
            | OpenFlags::SQLITE_OPEN_URI
            | OpenFlags::SQLITE_OPEN_NO_MUTEX;
        let conn = if let Some(name) = url.strip_prefix("sqlite::memory:") {
            if name.is_empty() {
                let n = PRIVATE_DB_COUNTER.fetch_add(1, Ordering::Relaxed);
                let uri = format!("file:t2sql-private-{}-{n}?mode=memory", std::process::id());
                rusqlite::Connection::open_with_flags(uri, flags)
            } else {
                let uri = format!("file:{name}?mode=memory&cache=shared");
                rusqlite::Connection::open_with_flags(uri, flags)
            }
        } else if let Some(path) = url
            .strip_prefix("sqlite://")
            .or_else(|| url.strip_prefix("sqlite:"))
        {
            rusqlite::Connection::open_with_flags(path, flags)
        } else {
            return Err(RunnerError::UnsupportedUrl(url.to_string()));
        }
        .map_err(open_err)?;
        conn.busy_timeout(Duration::from_secs(5)).map_err(open_err)?;
        Ok(Box::new(SqliteConnection { conn }))
    }
}

struct SqliteConnection {
    conn: rusqlite::Connection,
}

enum RunError {
    Sqlite(rusqlite::Error),
    Rejected(String),
}

impl From<rusqlite::Error> for RunError {
    fn from(e: rusqlite::Error) -> Self {
        RunError::Sqlite(e)
    }
}

fn is_connection_failure(e: &rusqlite::Error) -> bool {
    matches!(
        e.sqlite_error_code(),
        Some(ErrorCode::CannotOpen | ErrorCode::NotADatabase | ErrorCode::SystemIoFailure)
    )
}

/// Interprets a stored value using the column's declared type where SQLite's
/// storage classes lose information (booleans, dates, timestamps).
fn raw_value(value: ValueRef<'_>, decl: Option<&str>) -> RawValue {
    let decl = decl.map(str::to_ascii_uppercase).unwrap_or_default();
    let is_timestamp = decl.contains("TIMESTAMP") || decl.contains("DATETIME");
    let is_date = !is_timestamp && decl.contains("DATE");
    match value {
        ValueRef::Null => RawValue::Null,
        ValueRef::Integer(v) if decl.contains("BOOL") => RawValue::Boolean(v != 0),
        ValueRef::Integer(v) => RawValue::Integer(v),
        ValueRef::Real(v) => RawValue::Real(v),
        ValueRef::Text(bytes) => {
            let text = String::from_utf8_lossy(bytes).into_owned();
            if is_timestamp {
                RawValue::Timestamp(text)
            } else if is_date {
                RawValue::Date(text)
            } else if decl.contains("DECIMAL") || decl.contains("NUMERIC") {
                RawValue::DecimalText(text)
            } else {
                RawValue::Text(text)
            }
        }
        ValueRef::Blob(bytes) => RawValue::Blob(bytes.to_vec()),
    }
}

impl SqliteConnection {
    fn run_query(&self, sql: &str) -> Result<ResultTable, RunError> {
        let mut stmt = self.conn.prepare(sql)?;
        if !stmt.readonly() {
            return Err(RunError::Rejected(
                "only read-only statements may be executed".into(),
            ));
        }
        let decls: Vec<Option<String>> = stmt
            .columns()
            .iter()
            .map(|c| c.decl_type().map(str::to_string))
            .collect();
        let mut columns: Vec<Column> = stmt
            .column_names()
            .into_iter()
            .map(|n| Column::new(n, Vec::new()))
            .collect();
        let mut rows = stmt.query([])?;
        let mut row_count = 0;
        while let Some(row) = rows.next()? {
            for (i, col) in columns.iter_mut().enumerate() {
                let raw = raw_value(row.get_ref(i)?, decls[i].as_deref());
                let cell = canonicalize_cell(&raw).map_err(|e| RunError::Rejected(e.to_string()))?;
                col.cells.push(cell);
            }
            row_count += 1;
        }
        ResultTable::new(columns, row_count).map_err(|e| RunError::Rejected(e.to_string()))
    }
}

impl Connection for SqliteConnection {
    fn execute(&mut self, sql: &str, timeout: Duration) -> Result<ExecutionOutcome, RunnerError> {
        if timeout.is_zero() {
            return Err(RunnerError::InvalidTimeout);
        }
        let start = Instant::now();
        let deadline = start + timeout;
        self.conn
            .progress_handler(1_000, Some(move || Instant::now() >= deadline));
        let result = self.run_query(sql);
        self.conn.progress_handler(0, None::<fn() -> bool>);
        let duration_secs = start.elapsed().as_secs_f64();
        match result {
            Ok(table) => Ok(ExecutionOutcome::Success { table, duration_secs }),
            Err(RunError::Sqlite(e)) if e.sqlite_error_code() == Some(ErrorCode::OperationInterrupted) => {
                Ok(ExecutionOutcome::Timeout {
                    limit_secs: timeout.as_secs_f64(),
                })
            }
            Err(RunError::Sqlite(e)) if is_connection_failure(&e) => {
                Err(RunnerError::ConnectionLost(e.to_string()))
            }
            Err(RunError::Sqlite(e)) => Ok(ExecutionOutcome::EngineError {
                message: e.to_string(),
                duration_secs,
            }),
            Err(RunError::Rejected(message)) => Ok(ExecutionOutcome::EngineError {
                message,
                duration_secs,
            }),
        }
    }

    fn execute_script(&mut self, sql: &str) -> Result<(), RunnerError> {
        self.conn
            .execute_batch(sql)
            .map_err(|e| RunnerError::Engine(e.to_string()))
    }

    fn describe_schema(&mut self) -> Result<Vec<TableSchema>, RunnerError> {
        let engine = |e: rusqlite::Error| RunnerError::Engine(e.to_string());
        let mut stmt = self
            .conn
            .prepare(
                "SELECT name FROM sqlite_master \
                 WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
            )
            .map_err(engine)?;
        let names: Vec<String> = stmt
            .query_map([], |r| r.get(0))
            .map_err(engine)?
            .collect::<Result<_, _>>()
            .map_err(engine)?;
        let mut tables = Vec::with_capacity(names.len());
        for name in names {
            let mut info = self
                .conn
                .prepare("SELECT name, type FROM pragma_table_info(?1) ORDER BY cid")
                .map_err(engine)?;
            let columns = info
                .query_map([&name], |r| {
                    Ok(ColumnSchema {
                        name: r.get(0)?,
                        data_type: r.get(1)?,
                    })
                })
                .map_err(engine)?
                .collect::<Result<_, _>>()
                .map_err(engine)?;
            tables.push(TableSchema { name, columns });
        }
        Ok(tables)
    }

    fn close(self: Box<Self>) -> Result<(), RunnerError> {
        self.conn
            .close()
            .map_err(|(_, e)| RunnerError::ConnectionLost(e.to_string()))
    }
}
