use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stages::{
    expand_topics, generate_questions, generate_sql, heal_query, normalize_text, paraphrase,
    plausibility_filter, FilterDecision, HealOutcome,
};
use super::{split_dataset, DatagenError, PipelineConfig, PipelineStats, Stage, StageContext};
use crate::llm::{LlmClient, PromptLibrary};
use crate::model::{write_jsonl, DialectTag, ModelError, QuestionRecord, SchemaDescriptor, Split};
use crate::par::parallel_map;
use crate::runner::{preview, QueryExecutor};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const STAGE_LOG_FILE: &str = "stage_log.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One line of the stage log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLogEntry {
    pub stage: Stage,
    pub record_id: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl StageLogEntry {
    fn new(stage: Stage, record_id: impl Into<String>, action: &str) -> Self {
        Self {
            stage,
            record_id: record_id.into(),
            action: action.to_string(),
            reason: None,
        }
    }

    fn because(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub schema_id: String,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub stats: PipelineStats,
    pub records_file: String,
    pub stage_log_file: String,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<String>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| ModelError::Json {
            context: path.display().to_string(),
            source,
        })
    }
}

/// Where and how a run writes its artifacts.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Creation timestamp recorded in the manifest; the current time when `None`.
    pub created_at: Option<String>,
    /// Cassette path recorded in the manifest.
    pub cassette: Option<String>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            ..Self::default()
        }
    }
}

struct Question {
    id: String,
    topic: String,
    text: String,
}

enum LaneResult {
    NoSql,
    Unhealed,
    Filtered,
    Kept {
        sql: String,
        repaired: bool,
        rewrites: Vec<String>,
    },
}

struct Lane {
    id: String,
    topic: String,
    question: String,
    dialect: DialectTag,
    result: LaneResult,
    log: Vec<StageLogEntry>,
}

struct Run<'a> {
    config: &'a PipelineConfig,
    schema: &'a SchemaDescriptor,
    executor: &'a dyn QueryExecutor,
    ctx: StageContext<'a>,
    stats: PipelineStats,
    log: Vec<StageLogEntry>,
    records: Vec<QuestionRecord>,
}

/// Runs every generation stage and writes `records.jsonl`, `stage_log.jsonl`
/// and `manifest.json` into `options.out_dir`.
///
/// On failure the partial log and a manifest marked `failed` are still written.
pub fn run_pipeline(
    config: &PipelineConfig,
    schema: &SchemaDescriptor,
    executor: &dyn QueryExecutor,
    client: &LlmClient,
    prompts: &PromptLibrary,
    options: &RunOptions,
) -> Result<DatasetManifest, DatagenError> {
    config.validate()?;
    std::fs::create_dir_all(&options.out_dir)
        .map_err(|e| DatagenError::Output(ModelError::io(&options.out_dir, e)))?;
    let mut run = Run {
        config,
        schema,
        executor,
        ctx: StageContext::new(client, prompts, config),
        stats: PipelineStats::default(),
        log: Vec::new(),
        records: Vec::new(),
    };
    let result = run.execute();
    let manifest = DatasetManifest {
        status: if result.is_ok() {
            RunStatus::Complete
        } else {
            RunStatus::Failed
        },
        failed_stage: result.as_ref().err().map(DatagenError::stage),
        error: result.as_ref().err().map(ToString::to_string),
        schema_id: schema.id().to_string(),
        config_hash: config.hash(),
        config: config.clone(),
        stats: run.stats.clone(),
        records_file: RECORDS_FILE.into(),
        stage_log_file: STAGE_LOG_FILE.into(),
        created_at: options
            .created_at
            .clone()
            .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        cassette: options.cassette.clone(),
    };
    let dir = &options.out_dir;
    write_jsonl(&dir.join(RECORDS_FILE), &run.records)?;
    write_jsonl(&dir.join(STAGE_LOG_FILE), &run.log)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(|e| ModelError::io(&manifest_path, e))?;
    tracing::info!(status = ?manifest.status, dir = %dir.display(), "pipeline finished");
    result.map(|()| manifest)
}

impl Run<'_> {
    fn execute(&mut self) -> Result<(), DatagenError> {
        let topics = self.topics()?;
        let questions = self.questions(&topics)?;
        let lanes = self.lanes(&questions)?;
        self.assemble(lanes);
        self.split()
    }

    fn topics(&mut self) -> Result<Vec<String>, DatagenError> {
        let target = self.config.topic_target(self.schema.id());
        let schema = self.schema.with_dialect(self.config.dialects[0]);
        let topics = expand_topics(&self.config.seed_topics, target, &schema, &self.ctx)?;
        self.stats.topics_generated = topics.len();
        for (i, topic) in topics.iter().enumerate() {
            self.log.push(
                StageLogEntry::new(Stage::Topics, format!("t{i:03}"), "generated").because(topic.clone()),
            );
        }
        Ok(topics)
    }

    /// Generates questions per topic, then drops cross-topic repeats.
    fn questions(&mut self, topics: &[String]) -> Result<Vec<Question>, DatagenError> {
        let schema = self.schema.with_dialect(self.config.dialects[0]);
        let max_n = self.config.max_questions_per_topic;
        let ctx = &self.ctx;
        let per_topic = parallel_map(topics, self.config.concurrency, |_, topic| {
            generate_questions(topic, &schema, ctx, max_n)
        });
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (t, (topic, questions)) in topics.iter().zip(per_topic).enumerate() {
            for (q, text) in questions?.into_iter().enumerate() {
                let id = format!("t{t:03}-q{q:02}");
                self.log
                    .push(StageLogEntry::new(Stage::Questions, &id, "generated"));
                if !seen.insert(normalize_text(&text)) {
                    self.log.push(
                        StageLogEntry::new(Stage::Dedup, &id, "dropped")
                            .because("question repeats an earlier one"),
                    );
                    continue;
                }
                out.push(Question {
                    id,
                    topic: topic.clone(),
                    text,
                });
            }
        }
        self.stats.questions_generated = out.len() * self.config.dialects.len();
        Ok(out)
    }

    fn lanes(&mut self, questions: &[Question]) -> Result<Vec<Lane>, DatagenError> {
        let work: Vec<(DialectTag, &Question)> = self
            .config
            .dialects
            .iter()
            .flat_map(|d| questions.iter().map(move |q| (*d, q)))
            .collect();
        let results = parallel_map(&work, self.config.concurrency, |_, (dialect, q)| {
            self.lane(*dialect, q)
        });
        let mut lanes = Vec::with_capacity(results.len());
        for result in results {
            match result {
                Ok(lane) => lanes.push(lane),
                Err((err, log)) => {
                    // Keep the logs of every lane that finished before the failing one.
                    for lane in &lanes {
                        self.log.extend(lane.log.iter().cloned());
                    }
                    self.log.extend(log);
                    return Err(err);
                }
            }
        }
        Ok(lanes)
    }

    /// SQL generation, healing, filtering and paraphrasing for one question in one dialect.
    fn lane(&self, dialect: DialectTag, q: &Question) -> Result<Lane, (DatagenError, Vec<StageLogEntry>)> {
        let schema = self.schema.with_dialect(dialect);
        let id = format!("{}-{}", dialect.as_str(), q.id);
        let mut log = Vec::new();
        let finish = |result: LaneResult, log: Vec<StageLogEntry>| Lane {
            id: id.clone(),
            topic: q.topic.clone(),
            question: q.text.clone(),
            dialect,
            result,
            log,
        };
        macro_rules! attempt {
            ($e:expr) => {
                match $e {
                    Ok(v) => v,
                    Err(err) => {
                        log.push(StageLogEntry::new(err.stage(), &id, "failed").because(err.to_string()));
                        return Err((err, log));
                    }
                }
            };
        }

        let sql = match generate_sql(&q.text, &schema, &self.ctx) {
            Ok(sql) => sql,
            Err(DatagenError::EmptyCompletion) => {
                log.push(StageLogEntry::new(Stage::Sql, &id, "dropped").because("model returned no SQL"));
                return Ok(finish(LaneResult::NoSql, log));
            }
            Err(err) => attempt!(Err(err)),
        };
        log.push(StageLogEntry::new(Stage::Sql, &id, "generated"));

        let healed = attempt!(heal_query(
            &q.text,
            &sql,
            &schema,
            self.executor,
            &self.ctx,
            self.config.max_heal_attempts,
        ));
        let (sql, attempts, table) = match healed {
            HealOutcome::Healed {
                sql,
                attempts_used,
                table,
                ..
            } => (sql, attempts_used, table),
            HealOutcome::Dropped { last_failure, .. } => {
                log.push(StageLogEntry::new(Stage::Heal, &id, "dropped").because(last_failure));
                return Ok(finish(LaneResult::Unhealed, log));
            }
        };
        let action = if attempts == 0 { "passed" } else { "healed" };
        log.push(StageLogEntry::new(Stage::Heal, &id, action).because(format!("{attempts} repair rounds")));

        let decision = attempt!(plausibility_filter(&q.text, &preview(&table), &schema, &self.ctx));
        if let FilterDecision::Drop(reason) = decision {
            log.push(StageLogEntry::new(Stage::Filter, &id, "dropped").because(reason));
            return Ok(finish(LaneResult::Filtered, log));
        }
        log.push(StageLogEntry::new(Stage::Filter, &id, "kept"));

        let rewrites = attempt!(paraphrase(&q.text, &schema, &self.ctx, self.config.max_rewrites));
        log.push(
            StageLogEntry::new(Stage::Paraphrase, &id, "generated")
                .because(format!("{} rewrites", rewrites.len())),
        );
        Ok(finish(
            LaneResult::Kept {
                sql,
                repaired: attempts > 0,
                rewrites,
            },
            log,
        ))
    }

    /// Builds records in lane order, dropping rewrites that repeat an existing pair.
    fn assemble(&mut self, lanes: Vec<Lane>) {
        let mut pairs = HashSet::new();
        for lane in lanes {
            self.log.extend(lane.log);
            match lane.result {
                LaneResult::NoSql => self.stats.dropped_unhealed += 1,
                LaneResult::Unhealed => {
                    self.stats.sql_generated += 1;
                    self.stats.dropped_unhealed += 1;
                }
                LaneResult::Filtered => {
                    self.stats.sql_generated += 1;
                    self.stats.dropped_by_filter += 1;
                }
                LaneResult::Kept {
                    sql,
                    repaired,
                    rewrites,
                } => {
                    self.stats.sql_generated += 1;
                    self.stats.healed += usize::from(repaired);
                    self.stats.unique_pairs += 1;
                    let norm_sql = normalize_text(&sql);
                    pairs.insert((lane.dialect, normalize_text(&lane.question), norm_sql.clone()));
                    self.log.push(StageLogEntry::new(Stage::Dedup, &lane.id, "kept"));
                    let record = |id: String, question: String, k: u8| QuestionRecord {
                        id,
                        base_id: lane.id.clone(),
                        topic: lane.topic.clone(),
                        question,
                        rewrite_index: k,
                        sql: sql.clone(),
                        dialect: lane.dialect,
                        schema_id: self.schema.id().to_string(),
                        split: Split::Unassigned,
                    };
                    self.records
                        .push(record(lane.id.clone(), lane.question.clone(), 0));
                    let mut k = 0u8;
                    for (i, rewrite) in rewrites.into_iter().enumerate() {
                        if !pairs.insert((lane.dialect, normalize_text(&rewrite), norm_sql.clone())) {
                            let candidate = format!("{}-candidate{}", lane.id, i + 1);
                            self.log.push(
                                StageLogEntry::new(Stage::Dedup, candidate, "dropped")
                                    .because("question-SQL pair already present"),
                            );
                            continue;
                        }
                        k += 1;
                        let rewrite_id = format!("{}-r{k}", lane.id);
                        self.log
                            .push(StageLogEntry::new(Stage::Dedup, &rewrite_id, "kept"));
                        self.records.push(record(rewrite_id, rewrite, k));
                        self.stats.rewrites_generated += 1;
                    }
                }
            }
        }
        self.stats.total_pairs = self.records.len();
    }

    fn split(&mut self) -> Result<(), DatagenError> {
        let records = std::mem::take(&mut self.records);
        self.records = split_dataset(records, self.config.split_ratio, self.config.rng_seed)?;
        for r in &self.records {
            let action = if r.split == Split::Train { "train" } else { "test" };
            self.log.push(StageLogEntry::new(Stage::Split, &r.id, action));
        }
        self.stats.train_count = self.records.iter().filter(|r| r.split == Split::Train).count();
        self.stats.test_count = self.records.len() - self.stats.train_count;
        debug_assert!(self.stats.check().is_ok(), "{:?}", self.stats.check());
        Ok(())
    }
}
