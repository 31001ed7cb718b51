//! Execution-match comparison of a candidate result table against ground truth.
//!
//! Comparison ignores column names and row order. Each ground-truth column is
//! assigned, left to right, to the first unused candidate column whose sorted
//! contents (its *signature*) are equal. Extra candidate columns are allowed.
//!
//! With zero tolerance, signature equality is an equivalence relation, so the
//! greedy assignment succeeds exactly when some injective assignment exists.
//! With a positive tolerance equality stops being transitive and greedy can
//! miss an assignment that [`exact_matching_oracle`] finds.
//!
//! In [`CompareMode::StrictRows`] the projected rows must also agree. When the
//! greedy mapping fails that check, other signature-consistent mappings are
//! tried before the candidate is rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CellValue, ResultTable};

/// Absolute difference below which two numbers compare equal whenever a
/// positive relative tolerance is configured.
pub const ABSOLUTE_TOLERANCE_FLOOR: f64 = 1e-9;

/// Largest truth-column count the exhaustive oracle accepts.
pub const ORACLE_MAX_TRUTH_COLUMNS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    /// Per-column sorted multisets; rows need not stay coherent across columns.
    #[default]
    ColumnMultiset,
    /// Additionally requires the projected row multisets to agree.
    StrictRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Relative tolerance for comparisons involving decimals. Zero means exact.
    pub numeric_tolerance: f64,
    pub mode: CompareMode,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            numeric_tolerance: 1e-6,
            mode: CompareMode::ColumnMultiset,
        }
    }
}

impl CompareConfig {
    pub fn exact() -> Self {
        Self {
            numeric_tolerance: 0.0,
            ..Self::default()
        }
    }

    pub fn strict(mut self) -> Self {
        self.mode = CompareMode::StrictRows;
        self
    }

    pub fn validate(&self) -> Result<(), CompareError> {
        if self.numeric_tolerance.is_finite() && self.numeric_tolerance >= 0.0 {
            Ok(())
        } else {
            Err(CompareError::InvalidTolerance(self.numeric_tolerance))
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("numeric tolerance must be finite and non-negative, got {0}")]
    InvalidTolerance(f64),
    #[error("oracle supports at most {limit} truth columns, got {actual}")]
    SizeLimitExceeded { limit: usize, actual: usize },
    #[error("row counts differ: {truth} vs {candidate}")]
    RowCountMismatch { truth: usize, candidate: usize },
}

/// Injective assignment of truth columns (by position) to candidate columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMapping(Vec<MappedColumn>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappedColumn {
    pub truth: usize,
    pub candidate: usize,
}

impl ColumnMapping {
    /// Builds a mapping where `candidates[i]` is the candidate column for truth column `i`.
    pub fn from_candidates(candidates: Vec<usize>) -> Self {
        Self(
            candidates
                .into_iter()
                .enumerate()
                .map(|(truth, candidate)| MappedColumn { truth, candidate })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn candidate_for(&self, truth: usize) -> Option<usize> {
        self.0.get(truth).map(|m| m.candidate)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MappedColumn> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CompareVerdict {
    Correct {
        mapping: ColumnMapping,
    },
    RowCountMismatch {
        truth_rows: usize,
        candidate_rows: usize,
    },
    UnmatchedColumn {
        truth_column_index: usize,
    },
    RowSetMismatch,
}

impl CompareVerdict {
    pub fn is_correct(&self) -> bool {
        matches!(self, CompareVerdict::Correct { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            CompareVerdict::Correct { .. } => "correct",
            CompareVerdict::RowCountMismatch { .. } => "row_count_mismatch",
            CompareVerdict::UnmatchedColumn { .. } => "unmatched_column",
            CompareVerdict::RowSetMismatch => "row_set_mismatch",
        }
    }
}

/// Greedy matching gave up on this truth column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnmatchedColumn(pub usize);

/// Cell equality under a relative tolerance.
///
/// Tolerance applies only when at least one side is a decimal; integers
/// against integers and all non-numeric cells compare exactly.
pub fn cells_equal(a: &CellValue, b: &CellValue, tolerance: f64) -> bool {
    if tolerance > 0.0 {
        if let (CellValue::Decimal(_), _) | (_, CellValue::Decimal(_)) = (a, b) {
            if let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) {
                let diff = (x - y).abs();
                let scale = x.abs().max(y.abs());
                return diff <= (tolerance * scale).max(ABSOLUTE_TOLERANCE_FLOOR);
            }
        }
    }
    a == b
}

/// Sorted cells of one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSignature(Vec<CellValue>);

impl ColumnSignature {
    pub fn cells(&self) -> &[CellValue] {
        &self.0
    }

    /// Element-wise equality, decimals compared under the configured tolerance.
    pub fn matches(&self, other: &ColumnSignature, cfg: &CompareConfig) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| cells_equal(a, b, cfg.numeric_tolerance))
    }
}

pub fn column_signature(cells: &[CellValue]) -> ColumnSignature {
    let mut sorted = cells.to_vec();
    sorted.sort();
    ColumnSignature(sorted)
}

fn signatures(table: &ResultTable) -> Vec<ColumnSignature> {
    table
        .columns()
        .iter()
        .map(|c| column_signature(&c.cells))
        .collect()
}

/// Assigns each truth column, in order, to the lowest-index unused candidate
/// column with a matching signature. Fails on the first truth column left
/// without a partner.
pub fn match_columns_greedy(
    truth: &ResultTable,
    candidate: &ResultTable,
    cfg: &CompareConfig,
) -> Result<ColumnMapping, UnmatchedColumn> {
    let truth_sigs = signatures(truth);
    let cand_sigs = signatures(candidate);
    let mut used = vec![false; cand_sigs.len()];
    let mut assigned = Vec::with_capacity(truth_sigs.len());
    for (t, sig) in truth_sigs.iter().enumerate() {
        let pick = (0..cand_sigs.len()).find(|&c| !used[c] && sig.matches(&cand_sigs[c], cfg));
        match pick {
            Some(c) => {
                used[c] = true;
                assigned.push(c);
            }
            None => return Err(UnmatchedColumn(t)),
        }
    }
    Ok(ColumnMapping::from_candidates(assigned))
}

/// Sorts both tables' rows (candidate projected through `mapping`) and checks
/// them element-wise.
pub fn strict_row_check(
    truth: &ResultTable,
    candidate: &ResultTable,
    mapping: &ColumnMapping,
    cfg: &CompareConfig,
) -> bool {
    if truth.row_count() != candidate.row_count() || mapping.len() != truth.column_count() {
        return false;
    }
    let mut truth_rows: Vec<Vec<&CellValue>> = truth.rows().collect();
    let mut cand_rows: Vec<Vec<&CellValue>> = (0..candidate.row_count())
        .map(|r| {
            mapping
                .iter()
                .map(|m| &candidate.columns()[m.candidate].cells[r])
                .collect()
        })
        .collect();
    truth_rows.sort();
    cand_rows.sort();
    truth_rows.iter().zip(&cand_rows).all(|(a, b)| {
        a.iter()
            .zip(b)
            .all(|(x, y)| cells_equal(x, y, cfg.numeric_tolerance))
    })
}

pub fn compare_tables(truth: &ResultTable, candidate: &ResultTable, cfg: &CompareConfig) -> CompareVerdict {
    if truth.row_count() != candidate.row_count() {
        return CompareVerdict::RowCountMismatch {
            truth_rows: truth.row_count(),
            candidate_rows: candidate.row_count(),
        };
    }
    let mapping = match match_columns_greedy(truth, candidate, cfg) {
        Ok(m) => m,
        Err(UnmatchedColumn(i)) => {
            return CompareVerdict::UnmatchedColumn {
                truth_column_index: i,
            }
        }
    };
    if cfg.mode == CompareMode::StrictRows && !strict_row_check(truth, candidate, &mapping, cfg) {
        return match row_coherent_mapping(truth, candidate, cfg) {
            Some(mapping) => CompareVerdict::Correct { mapping },
            None => CompareVerdict::RowSetMismatch,
        };
    }
    CompareVerdict::Correct { mapping }
}

/// Assignments explored before [`row_coherent_mapping`] gives up.
pub const ROW_SEARCH_BUDGET: usize = 20_000;

/// Searches the signature-consistent assignments for one under which the
/// projected row multisets agree.
///
/// The greedy pick among columns with identical signatures is arbitrary, and
/// only one of them may line up with the truth rows. The search extends a
/// partial assignment one truth column at a time and abandons it as soon as
/// the rows projected so far disagree. Returns `None` when no assignment works
/// or the budget runs out.
pub fn row_coherent_mapping(
    truth: &ResultTable,
    candidate: &ResultTable,
    cfg: &CompareConfig,
) -> Option<ColumnMapping> {
    if truth.row_count() != candidate.row_count() {
        return None;
    }
    let cand_sigs = signatures(candidate);
    let options: Vec<Vec<usize>> = signatures(truth)
        .iter()
        .map(|t| {
            (0..cand_sigs.len())
                .filter(|&j| t.matches(&cand_sigs[j], cfg))
                .collect()
        })
        .collect();
    let mut search = RowSearch {
        truth,
        candidate,
        cfg,
        options,
        assigned: Vec::with_capacity(truth.column_count()),
        used: vec![false; candidate.column_count()],
        budget: ROW_SEARCH_BUDGET,
    };
    search
        .extend()
        .then(|| ColumnMapping::from_candidates(search.assigned))
}

struct RowSearch<'a> {
    truth: &'a ResultTable,
    candidate: &'a ResultTable,
    cfg: &'a CompareConfig,
    options: Vec<Vec<usize>>,
    assigned: Vec<usize>,
    used: Vec<bool>,
    budget: usize,
}

impl<'a> RowSearch<'a> {
    fn extend(&mut self) -> bool {
        let t = self.assigned.len();
        if t == self.options.len() {
            return true;
        }
        for i in 0..self.options[t].len() {
            let c = self.options[t][i];
            if self.used[c] || self.budget == 0 {
                continue;
            }
            self.budget -= 1;
            self.assigned.push(c);
            self.used[c] = true;
            if self.prefix_rows_agree() && self.extend() {
                return true;
            }
            self.used[c] = false;
            self.assigned.pop();
        }
        false
    }

    fn prefix_rows_agree(&self) -> bool {
        let k = self.assigned.len();
        let project = |table: &'a ResultTable, cols: &mut dyn Iterator<Item = usize>| {
            let cols: Vec<usize> = cols.collect();
            let mut rows: Vec<Vec<&'a CellValue>> = (0..table.row_count())
                .map(|r| cols.iter().map(|&c| &table.columns()[c].cells[r]).collect())
                .collect();
            rows.sort();
            rows
        };
        let truth_rows = project(self.truth, &mut (0..k));
        let cand_rows = project(self.candidate, &mut self.assigned.iter().copied());
        truth_rows.iter().zip(&cand_rows).all(|(a, b)| {
            a.iter()
                .zip(b)
                .all(|(x, y)| cells_equal(x, y, self.cfg.numeric_tolerance))
        })
    }
}

/// Decides by maximum bipartite matching whether *any* injective assignment
/// of truth columns to candidate columns has all pairs equal.
///
/// At zero tolerance column equality is decided by counting canonical cell
/// encodings rather than by sorting, so this check shares no code path with
/// the greedy matcher beyond the cell types themselves.
pub fn exact_matching_oracle(
    truth: &ResultTable,
    candidate: &ResultTable,
    cfg: &CompareConfig,
) -> Result<bool, CompareError> {
    if truth.column_count() > ORACLE_MAX_TRUTH_COLUMNS {
        return Err(CompareError::SizeLimitExceeded {
            limit: ORACLE_MAX_TRUTH_COLUMNS,
            actual: truth.column_count(),
        });
    }
    if truth.row_count() != candidate.row_count() {
        return Err(CompareError::RowCountMismatch {
            truth: truth.row_count(),
            candidate: candidate.row_count(),
        });
    }
    let adjacency: Vec<Vec<usize>> = if cfg.numeric_tolerance == 0.0 {
        let counts = |cells: &[CellValue]| {
            let mut m: BTreeMap<String, usize> = BTreeMap::new();
            for c in cells {
                *m.entry(serde_json::to_string(c).expect("cell encodes"))
                    .or_default() += 1;
            }
            m
        };
        let cand: Vec<_> = candidate.columns().iter().map(|c| counts(&c.cells)).collect();
        truth
            .columns()
            .iter()
            .map(|t| {
                let tc = counts(&t.cells);
                (0..cand.len()).filter(|&j| cand[j] == tc).collect()
            })
            .collect()
    } else {
        let cand = signatures(candidate);
        signatures(truth)
            .iter()
            .map(|t| (0..cand.len()).filter(|&j| t.matches(&cand[j], cfg)).collect())
            .collect()
    };
    Ok(max_matching(&adjacency, candidate.column_count()) == truth.column_count())
}

/// Kuhn's augmenting-path maximum matching.
fn max_matching(adjacency: &[Vec<usize>], right_size: usize) -> usize {
    fn augment(
        left: usize,
        adjacency: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &right in &adjacency[left] {
            if seen[right] {
                continue;
            }
            seen[right] = true;
            if owner[right].is_none_or(|prev| augment(prev, adjacency, seen, owner)) {
                owner[right] = Some(left);
                return true;
            }
        }
        false
    }

    let mut owner = vec![None; right_size];
    (0..adjacency.len())
        .filter(|&left| augment(left, adjacency, &mut vec![false; right_size], &mut owner))
        .count()
}
