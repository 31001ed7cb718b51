use serde::{Deserialize, Serialize};

use crate::model::ResultTable;

/// Number of leading rows shown to the plausibility judge.
pub const PREVIEW_ROWS: usize = 5;

/// Dimensions, column names and first rows of a result, as shown to a judge model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultPreview {
    pub row_count: usize,
    pub column_count: usize,
    pub column_names: Vec<String>,
    pub head_rows: Vec<Vec<String>>,
}

pub fn preview(table: &ResultTable) -> ResultPreview {
    ResultPreview {
        row_count: table.row_count(),
        column_count: table.column_count(),
        column_names: table.column_names().map(str::to_string).collect(),
        head_rows: table
            .rows()
            .take(PREVIEW_ROWS)
            .map(|row| row.iter().map(|c| c.to_string()).collect())
            .collect(),
    }
}

impl ResultPreview {
    /// `rows×columns`.
    pub fn dims(&self) -> String {
        format!("{}×{}", self.row_count, self.column_count)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "Dimensions: {} (rows×columns)\nColumns: {}\n",
            self.dims(),
            self.column_names.join(" | ")
        );
        if self.head_rows.is_empty() {
            out.push_str("First rows: (none)\n");
        } else {
            out.push_str(&format!("First {} rows:\n", self.head_rows.len()));
            for row in &self.head_rows {
                out.push_str(&row.join(" | "));
                out.push('\n');
            }
        }
        out
    }
}
