use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BenchError, BenchRecord};

const NANOS_PER_SEC: u128 = 1_000_000_000;

/// Summary of one benchmark run, kept as exact counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: u64,
    /// Generated queries that ran and returned at least one row.
    pub successes: u64,
    /// Generated queries whose result matched the ground truth.
    pub correct: u64,
    pub total_generation_nanos: u128,
}

impl Metrics {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.n as f64
    }

    pub fn accuracy_rate(&self) -> f64 {
        self.correct as f64 / self.n as f64
    }

    pub fn avg_query_duration_secs(&self) -> f64 {
        self.total_generation_nanos as f64 / NANOS_PER_SEC as f64 / self.n as f64
    }

    /// `count / n` as a percentage, rounded half up to two decimals.
    fn percent(&self, count: u64) -> String {
        let hundredths = div_round_half_up(u128::from(count) * 10_000, u128::from(self.n));
        format!("{}.{:02}%", hundredths / 100, hundredths % 100)
    }

    pub fn success_percent(&self) -> String {
        self.percent(self.successes)
    }

    pub fn accuracy_percent(&self) -> String {
        self.percent(self.correct)
    }

    /// Mean generation time in seconds, rounded half up to two decimals.
    pub fn duration_text(&self) -> String {
        let centis = div_round_half_up(
            self.total_generation_nanos * 100,
            u128::from(self.n) * NANOS_PER_SEC,
        );
        format!("{}.{:02}s", centis / 100, centis % 100)
    }
}

fn div_round_half_up(num: u128, den: u128) -> u128 {
    (2 * num + den) / (2 * den)
}

pub fn compute_metrics(records: &[BenchRecord]) -> Result<Metrics, BenchError> {
    if records.is_empty() {
        return Err(BenchError::EmptyRecordSet);
    }
    let count = |f: fn(&BenchRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    Ok(Metrics {
        n: records.len() as u64,
        successes: count(BenchRecord::is_success),
        correct: count(BenchRecord::is_correct),
        total_generation_nanos: records
            .iter()
            .map(|r| (r.generation_duration_secs * 1e9).round() as u128)
            .sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    /// Row label, e.g. `"GPT-4 (Snowflake)"`.
    pub model: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Markdown,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    model: &'a str,
    n: u64,
    successes: u64,
    correct: u64,
    avg_query_duration_secs: f64,
    success_rate: f64,
    accuracy_rate: f64,
}

pub fn render_report(entries: &[ReportEntry], format: ReportFormat) -> Result<String, BenchError> {
    if entries.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let mut names = HashSet::new();
    if let Some(dup) = entries.iter().find(|e| !names.insert(e.model.as_str())) {
        return Err(BenchError::DuplicateModel(dup.model.clone()));
    }
    Ok(match format {
        ReportFormat::Markdown => {
            let mut out = String::from(
                "| Models | Query Duration (Avg.) | Success Rate (%) | Accuracy Rate (%) |\n\
                 |---|---|---|---|\n",
            );
            for e in entries {
                let m = &e.metrics;
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    e.model,
                    m.duration_text(),
                    m.success_percent(),
                    m.accuracy_percent()
                );
            }
            out
        }
        ReportFormat::Json => {
            let rows: Vec<JsonRow> = entries
                .iter()
                .map(|e| JsonRow {
                    model: &e.model,
                    n: e.metrics.n,
                    successes: e.metrics.successes,
                    correct: e.metrics.correct,
                    avg_query_duration_secs: e.metrics.avg_query_duration_secs(),
                    success_rate: e.metrics.success_rate(),
                    accuracy_rate: e.metrics.accuracy_rate(),
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&rows).expect("report serializes");
            text.push('\n');
            text
        }
    })
}
