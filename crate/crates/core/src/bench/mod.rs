//! Benchmarking a text-to-SQL model against a labelled test set.

mod metrics;
mod models;

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::compare::{compare_tables, CompareConfig, CompareError, CompareVerdict};
use crate::model::{DialectTag, QuestionRecord, SchemaDescriptor};
use crate::par::parallel_map;
use crate::runner::{ExecutionOutcome, QueryExecutor, RunnerError};

pub use metrics::{compute_metrics, render_report, Metrics, ReportEntry, ReportFormat};
pub use models::{ChatModel, DropLastColumnModel, EchoModel, SqlGenerator};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("the test set is empty")]
    EmptyTestSet,
    #[error("no benchmark records to summarize")]
    EmptyRecordSet,
    #[error("a report needs at least one entry")]
    EmptyReport,
    #[error("model name {0:?} appears more than once in the report")]
    DuplicateModel(String),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error("query execution failed: {0}")]
    Runner(#[from] RunnerError),
}

/// Comparison outcome of one benchmarked question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Compared(CompareVerdict),
    /// The generated query did not produce rows to compare.
    NotEvaluated {
        reason: String,
    },
}

impl Verdict {
    pub fn is_correct(&self) -> bool {
        matches!(self, Verdict::Compared(v) if v.is_correct())
    }
}

/// Audit line for one test question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub record_id: String,
    pub dialect: DialectTag,
    pub generated_sql: String,
    pub generation_duration_secs: f64,
    /// Absent when generation itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<ExecutionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_error: Option<String>,
    pub verdict: Verdict,
}

impl BenchRecord {
    /// Generated SQL ran and returned at least one row.
    pub fn is_success(&self) -> bool {
        self.outcome.as_ref().is_some_and(ExecutionOutcome::has_rows)
    }

    pub fn is_correct(&self) -> bool {
        self.verdict.is_correct()
    }
}

/// A test record left out because its own SQL does not yield rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRecord {
    pub record_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub records: Vec<BenchRecord>,
    pub excluded: Vec<ExcludedRecord>,
}

impl BenchRun {
    /// Records grouped by dialect, ordered by dialect name.
    pub fn by_dialect(&self) -> Vec<(DialectTag, Vec<BenchRecord>)> {
        let mut out: BTreeMap<&str, (DialectTag, Vec<BenchRecord>)> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.dialect.as_str())
                .or_insert_with(|| (r.dialect, Vec::new()))
                .1
                .push(r.clone());
        }
        out.into_values().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub compare: CompareConfig,
    /// Test records processed in parallel.
    pub concurrency: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            compare: CompareConfig::default(),
            concurrency: 4,
        }
    }
}

/// Generates, executes and compares SQL for every record in `testset`.
///
/// Ground-truth SQL runs once per distinct query. Records whose ground truth
/// fails or returns no rows are excluded rather than scored. Only a lost
/// database connection aborts the run.
pub fn run_benchmark(
    testset: &[QuestionRecord],
    model: &dyn SqlGenerator,
    schema: &SchemaDescriptor,
    executor: &dyn QueryExecutor,
    options: &BenchOptions,
) -> Result<BenchRun, BenchError> {
    if testset.is_empty() {
        return Err(BenchError::EmptyTestSet);
    }
    options.compare.validate()?;

    let mut unique: Vec<&str> = testset.iter().map(|r| r.sql.as_str()).collect();
    unique.sort_unstable();
    unique.dedup();
    let truths = parallel_map(&unique, options.concurrency, |_, sql| executor.run(sql));
    let mut truth_by_sql = HashMap::new();
    for (sql, outcome) in unique.into_iter().zip(truths) {
        truth_by_sql.insert(sql, outcome?);
    }

    let mut run = BenchRun::default();
    let mut scored = Vec::new();
    for r in testset {
        match truth_by_sql[r.sql.as_str()].failure_reason() {
            None => scored.push(r),
            Some(reason) => {
                tracing::warn!(record = %r.id, %reason, "ground truth unusable; record excluded");
                run.excluded.push(ExcludedRecord {
                    record_id: r.id.clone(),
                    reason: format!("ground truth: {reason}"),
                });
            }
        }
    }

    let results = parallel_map(&scored, options.concurrency, |_, r| {
        let truth = truth_by_sql[r.sql.as_str()]
            .table()
            .expect("scored truths have rows");
        bench_one(r, truth, model, schema, executor, &options.compare)
    });
    for result in results {
        run.records.push(result?);
    }
    Ok(run)
}

fn bench_one(
    record: &QuestionRecord,
    truth: &crate::model::ResultTable,
    model: &dyn SqlGenerator,
    schema: &SchemaDescriptor,
    executor: &dyn QueryExecutor,
    cfg: &CompareConfig,
) -> Result<BenchRecord, BenchError> {
    let schema = schema.with_dialect(record.dialect);
    let started = Instant::now();
    let generated = model.generate(record, &schema);
    let generation_duration_secs = started.elapsed().as_secs_f64();
    let mut out = BenchRecord {
        record_id: record.id.clone(),
        dialect: record.dialect,
        generated_sql: String::new(),
        generation_duration_secs,
        outcome: None,
        generation_error: None,
        verdict: Verdict::NotEvaluated {
            reason: String::new(),
        },
    };
    let sql = match generated {
        Ok(sql) => sql,
        Err(e) => {
            out.verdict = Verdict::NotEvaluated {
                reason: format!("generation failed: {e}"),
            };
            out.generation_error = Some(e);
            return Ok(out);
        }
    };
    let outcome = executor.run(&sql)?;
    out.verdict = match (outcome.table(), outcome.failure_reason()) {
        (Some(candidate), None) => Verdict::Compared(compare_tables(truth, candidate, cfg)),
        (_, reason) => Verdict::NotEvaluated {
            reason: reason.unwrap_or_default(),
        },
    };
    out.generated_sql = sql;
    out.outcome = Some(outcome);
    Ok(out)
}
