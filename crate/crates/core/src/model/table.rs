use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{canonicalize_cell, CellValue, ModelError, RawValue};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub cells: Vec<CellValue>,
}

impl Column {
    pub fn new(name: impl Into<String>, cells: Vec<CellValue>) -> Self {
        Self {
            name: name.into(),
            cells,
        }
    }
}

/// A fully materialized query result, stored column-major.
///
/// Every column holds exactly `row_count` cells. Column names may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr")]
pub struct ResultTable {
    columns: Vec<Column>,
    row_count: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRepr {
    columns: Vec<Column>,
    row_count: usize,
}

impl TryFrom<TableRepr> for ResultTable {
    type Error = ModelError;

    fn try_from(repr: TableRepr) -> Result<Self, Self::Error> {
        ResultTable::new(repr.columns, repr.row_count)
    }
}

impl ResultTable {
    pub fn new(columns: Vec<Column>, row_count: usize) -> Result<Self, ModelError> {
        if let Some(bad) = columns.iter().find(|c| c.cells.len() != row_count) {
            return Err(ModelError::RaggedColumn {
                column: bad.name.clone(),
                expected: row_count,
                found: bad.cells.len(),
            });
        }
        Ok(Self { columns, row_count })
    }

    /// Builds a table from row-major data.
    pub fn from_rows<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        rows: Vec<Vec<CellValue>>,
    ) -> Result<Self, ModelError> {
        let mut columns: Vec<Column> = names
            .into_iter()
            .map(|n| Column::new(n, Vec::with_capacity(rows.len())))
            .collect();
        let row_count = rows.len();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != columns.len() {
                return Err(ModelError::RaggedRow {
                    row: i,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (col, cell) in columns.iter_mut().zip(row) {
                col.cells.push(cell);
            }
        }
        Ok(Self { columns, row_count })
    }

    /// Convenience for tests and fixtures: integer-only columns.
    pub fn from_int_columns(cols: &[(&str, &[i64])]) -> Result<Self, ModelError> {
        let row_count = cols.first().map_or(0, |(_, v)| v.len());
        let columns = cols
            .iter()
            .map(|(name, vals)| Column::new(*name, vals.iter().map(|v| CellValue::Integer(*v)).collect()))
            .collect();
        Self::new(columns, row_count)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn row(&self, index: usize) -> Vec<&CellValue> {
        self.columns.iter().map(|c| &c.cells[index]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<&CellValue>> + '_ {
        (0..self.row_count).map(move |i| self.row(i))
    }

    /// Reads a CSV file with a header row, inferring one cell type per field.
    ///
    /// Inference per field: empty → Null, `true`/`false` → Boolean, integer,
    /// decimal, `YYYY-MM-DD` → Date, ISO timestamp → Timestamp, anything else Text.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::None)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(infer_csv_cell).collect());
        }
        Self::from_rows(names, rows)
    }
}

pub fn infer_csv_cell(field: &str) -> CellValue {
    if field.is_empty() {
        return CellValue::Null;
    }
    match field {
        "true" | "TRUE" | "True" => return CellValue::Boolean(true),
        "false" | "FALSE" | "False" => return CellValue::Boolean(false),
        _ => {}
    }
    let looks_numeric = field
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'))
        && field.chars().any(|c| c.is_ascii_digit());
    let candidates = [
        looks_numeric.then(|| RawValue::DecimalText(field.to_string())),
        Some(RawValue::Date(field.to_string())),
        Some(RawValue::Timestamp(field.to_string())),
    ];
    candidates
        .into_iter()
        .flatten()
        .find_map(|raw| canonicalize_cell(&raw).ok())
        .unwrap_or_else(|| CellValue::text(field))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_columns_rejected() {
        let err = ResultTable::new(
            vec![
                Column::new("a", vec![CellValue::Integer(1)]),
                Column::new("b", vec![]),
            ],
            1,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::RaggedColumn { found: 0, .. }));
    }

    #[test]
    fn duplicate_names_allowed() {
        let t = ResultTable::from_int_columns(&[("x", &[1]), ("x", &[2])]).unwrap();
        assert_eq!(t.column_names().collect::<Vec<_>>(), ["x", "x"]);
    }

    #[test]
    fn json_shape() {
        let t = ResultTable::from_int_columns(&[("a", &[1, 2])]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"columns":[{"name":"a","cells":[{"t":"int","v":1},{"t":"int","v":2}]}],"row_count":2}"#
        );
        let bad = r#"{"columns":[{"name":"a","cells":[]}],"row_count":2}"#;
        assert!(serde_json::from_str::<ResultTable>(bad).is_err());
    }

    #[test]
    fn csv_inference() {
        let csv =
            "id,price,name,day,flag,missing\n1,2.50,Ann ,2023-04-01,true,\n2,3.0,Bob,2023-04-02,false,\n";
        let t = ResultTable::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(t.row_count(), 2);
        let row = t.row(0);
        assert_eq!(row[0], &CellValue::Integer(1));
        assert_eq!(row[1], &CellValue::number(2.5).unwrap());
        assert_eq!(row[2], &CellValue::text("Ann"));
        assert_eq!(row[3].to_string(), "2023-04-01");
        assert_eq!(row[4], &CellValue::Boolean(true));
        assert_eq!(row[5], &CellValue::Null);
        assert_eq!(t.row(1)[1], &CellValue::Integer(3));
    }
}
