//! Random result tables for comparator property checks.
//!
//! Cells come from small per-type pools so that equal columns, duplicate
//! columns and near-equal decimals turn up often.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use t2sql_core::model::{CellValue, Column, ResultTable};

/// Includes values 0.9 and 1.8 parts per million above 1.0, so a relative
/// tolerance of 1e-6 links neighbours but not the ends.
const DECIMALS: [f64; 5] = [1.5, 1.000_000_9, 1.000_001_8, -2.25, 1.000_000_3];
const TEXTS: [&str; 4] = ["north", "south", "east", "west"];

#[derive(Clone, Copy)]
enum Kind {
    Int,
    Dec,
    Text,
    Date,
    Bool,
}

const KINDS: [Kind; 5] = [Kind::Int, Kind::Dec, Kind::Text, Kind::Date, Kind::Bool];

fn cell<R: Rng>(rng: &mut R, kind: Kind) -> CellValue {
    if rng.gen_bool(0.1) {
        return CellValue::Null;
    }
    match kind {
        Kind::Int => CellValue::Integer(rng.gen_range(0..4)),
        Kind::Dec => CellValue::number(*DECIMALS.choose(rng).unwrap()).unwrap(),
        Kind::Text => CellValue::text(*TEXTS.choose(rng).unwrap()),
        Kind::Date => CellValue::Date(NaiveDate::from_ymd_opt(2024, 1, rng.gen_range(1..4)).unwrap()),
        Kind::Bool => CellValue::Boolean(rng.gen()),
    }
}

pub fn random_cells<R: Rng>(rng: &mut R, rows: usize) -> Vec<CellValue> {
    let kind = *KINDS.choose(rng).unwrap();
    (0..rows).map(|_| cell(rng, kind)).collect()
}

pub fn random_table<R: Rng>(rng: &mut R, cols: usize, rows: usize) -> ResultTable {
    let columns = (0..cols)
        .map(|i| Column::new(format!("t{i}"), random_cells(rng, rows)))
        .collect();
    ResultTable::new(columns, rows).unwrap()
}

/// Shuffles rows and columns and gives every column a fresh name.
pub fn shuffle_and_rename<R: Rng>(rng: &mut R, table: &ResultTable) -> ResultTable {
    let rows = table.row_count();
    let mut row_order: Vec<usize> = (0..rows).collect();
    row_order.shuffle(rng);
    let mut columns: Vec<Column> = table
        .columns()
        .iter()
        .map(|c| row_order.iter().map(|&r| c.cells[r].clone()).collect())
        .enumerate()
        .map(|(i, cells)| Column::new(format!("renamed_{i}"), cells))
        .collect();
    columns.shuffle(rng);
    ResultTable::new(columns, rows).unwrap()
}

/// Inserts a random column at a random position.
pub fn with_extra_column<R: Rng>(rng: &mut R, table: &ResultTable) -> ResultTable {
    let rows = table.row_count();
    let mut columns = table.columns().to_vec();
    let at = rng.gen_range(0..=columns.len());
    columns.insert(at, Column::new("extra", random_cells(rng, rows)));
    ResultTable::new(columns, rows).unwrap()
}

/// A truth table with 1..=`max_truth` columns and a candidate of the same
/// height with 1..=`max_candidate` columns.
///
/// Half the candidates are built from the truth's columns (so most should
/// match), optionally damaged; the rest are independent draws.
pub fn random_pair<R: Rng>(
    rng: &mut R,
    max_truth: usize,
    max_candidate: usize,
    max_rows: usize,
) -> (ResultTable, ResultTable) {
    let rows = rng.gen_range(0..=max_rows);
    let truth_cols = rng.gen_range(1..=max_truth);
    let truth = random_table(rng, truth_cols, rows);
    let cand_cols = rng.gen_range(1..=max_candidate);
    let mut columns: Vec<Column> = if rng.gen_bool(0.5) {
        let mut cols: Vec<Column> = truth.columns().to_vec();
        while cols.len() < cand_cols {
            let copy_of = rng.gen_range(0..truth.column_count());
            let cells = if rng.gen_bool(0.5) {
                truth.columns()[copy_of].cells.clone()
            } else {
                random_cells(rng, rows)
            };
            cols.push(Column::new("x", cells));
        }
        cols.truncate(cand_cols.max(1));
        if rows > 0 && rng.gen_bool(0.4) {
            let (c, r) = (rng.gen_range(0..cols.len()), rng.gen_range(0..rows));
            let replacement = random_cells(rng, 1).pop().unwrap();
            cols[c].cells[r] = replacement;
        }
        cols
    } else {
        (0..cand_cols)
            .map(|_| Column::new("x", random_cells(rng, rows)))
            .collect()
    };
    for (i, c) in columns.iter_mut().enumerate() {
        c.name = format!("c{i}");
    }
    let candidate = shuffle_and_rename(rng, &ResultTable::new(columns, rows).unwrap());
    (truth, candidate)
}
