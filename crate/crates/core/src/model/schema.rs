use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DialectTag {
    Snowflake,
    #[serde(rename = "googlesql")]
    GoogleSql,
    /// The embedded test engine.
    Generic,
}

impl DialectTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DialectTag::Snowflake => "snowflake",
            DialectTag::GoogleSql => "googlesql",
            DialectTag::Generic => "generic",
        }
    }

    /// Name used inside prompts.
    pub fn display_name(&self) -> &'static str {
        match self {
            DialectTag::Snowflake => "Snowflake SQL",
            DialectTag::GoogleSql => "GoogleSQL (BigQuery)",
            DialectTag::Generic => "SQLite-compatible SQL",
        }
    }
}

impl fmt::Display for DialectTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialectTag {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "snowflake" => Ok(DialectTag::Snowflake),
            "googlesql" | "bigquery" => Ok(DialectTag::GoogleSql),
            "generic" | "sqlite" => Ok(DialectTag::Generic),
            other => Err(ModelError::InvalidSchema(format!("unknown dialect {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub data_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
}

/// The database description handed to the model alongside a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaDescriptor {
    id: String,
    tables: Vec<TableSchema>,
    dialect: DialectTag,
}

impl SchemaDescriptor {
    pub fn new(
        id: impl Into<String>,
        tables: Vec<TableSchema>,
        dialect: DialectTag,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        let mut table_names = HashSet::new();
        for table in &tables {
            if table.name.is_empty() {
                return Err(ModelError::InvalidSchema("empty table name".into()));
            }
            if !table_names.insert(table.name.as_str()) {
                return Err(ModelError::InvalidSchema(format!(
                    "duplicate table {:?}",
                    table.name
                )));
            }
            let mut col_names = HashSet::new();
            for col in &table.columns {
                if col.name.is_empty() || !col_names.insert(col.name.as_str()) {
                    return Err(ModelError::InvalidSchema(format!(
                        "empty or duplicate column {:?} in table {:?}",
                        col.name, table.name
                    )));
                }
            }
        }
        Ok(Self { id, tables, dialect })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tables(&self) -> &[TableSchema] {
        &self.tables
    }

    pub fn dialect(&self) -> DialectTag {
        self.dialect
    }

    /// Same tables, different dialect.
    pub fn with_dialect(&self, dialect: DialectTag) -> Self {
        Self {
            dialect,
            ..self.clone()
        }
    }

    /// Plain-text rendering used in prompts, one table per block.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, table) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("TABLE {} (\n", table.name));
            let last = table.columns.len().saturating_sub(1);
            for (j, col) in table.columns.iter().enumerate() {
                let sep = if j == last { "" } else { "," };
                out.push_str(&format!("    {} {}{}\n", col.name, col.data_type, sep));
            }
            out.push_str(")\n");
        }
        out
    }
}
