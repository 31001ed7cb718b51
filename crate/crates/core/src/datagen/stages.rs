use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{DatagenError, Stage, StageContext};
use crate::llm::{CREATIVE_TEMPERATURE, DETERMINISTIC_TEMPERATURE};
use crate::model::{ResultTable, SchemaDescriptor};
use crate::runner::{QueryExecutor, ResultPreview};

/// Model calls allowed for growing the topic list.
pub const MAX_TOPIC_CALLS: usize = 8;

/// Token-set Jaccard similarity above which a question counts as a repeat.
pub const REPETITION_THRESHOLD: f64 = 0.9;

const UNPARSEABLE_JUDGE: &str = "unparseable judge response";

fn llm_err(stage: Stage) -> impl Fn(crate::llm::LlmError) -> DatagenError {
    move |source| DatagenError::Llm { stage, source }
}

/// Lower-cased, whitespace-collapsed form used for equality checks.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Splits a list-style reply into items, dropping bullets, numbering and blank lines.
pub fn parse_list(text: &str) -> Vec<String> {
    text.lines().filter_map(clean_list_item).collect()
}

fn clean_list_item(line: &str) -> Option<String> {
    let mut item = line.trim();
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = item.strip_prefix(bullet) {
            item = rest.trim_start();
        }
    }
    let digits = item.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &item[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            item = rest.trim_start();
        }
    }
    if item.len() >= 2 && item.starts_with('"') && item.ends_with('"') {
        item = &item[1..item.len() - 1];
    }
    let item = item.trim();
    (!item.is_empty()).then(|| item.to_string())
}

fn is_stop_marker(item: &str) -> bool {
    let core: String = item.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    core.eq_ignore_ascii_case("stop") && item.len() <= 8
}

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// |A ∩ B| / |A ∪ B| over lower-cased word tokens; two empty sets score 1.
pub fn jaccard_similarity(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// Grows `seed_topics` with model-proposed themes until `target` distinct
/// (case-insensitive) topics exist. Seeds come first, in order.
pub fn expand_topics(
    seed_topics: &[String],
    target: usize,
    schema: &SchemaDescriptor,
    ctx: &StageContext<'_>,
) -> Result<Vec<String>, DatagenError> {
    let mut topics: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    let mut add = |topic: &str, topics: &mut Vec<String>| {
        let topic = topic.trim();
        if !topic.is_empty() && seen.insert(topic.to_lowercase()) {
            topics.push(topic.to_string());
        }
    };
    for seed in seed_topics {
        add(seed, &mut topics);
    }
    if topics.is_empty() {
        return Err(DatagenError::InvalidConfig(
            "seed_topics must not be empty".into(),
        ));
    }
    let mut calls = 0;
    while topics.len() < target {
        if calls == MAX_TOPIC_CALLS {
            return Err(DatagenError::GenerationExhausted {
                have: topics.len(),
                target,
                calls,
            });
        }
        calls += 1;
        let existing = topics
            .iter()
            .map(|t| format!("- {t}"))
            .collect::<Vec<_>>()
            .join("\n");
        let vars = BTreeMap::from([
            ("schema", schema.render()),
            ("existing_topics", existing),
            ("count", (target - topics.len()).to_string()),
        ]);
        let reply = ctx
            .ask("topics", &vars, schema.dialect(), CREATIVE_TEMPERATURE)
            .map_err(llm_err(Stage::Topics))?;
        for item in parse_list(&reply) {
            add(&item, &mut topics);
        }
    }
    topics.truncate(target);
    Ok(topics)
}

/// Asks for up to `max_n` questions about `topic`. Generation stops at a
/// STOP line; questions too similar to an earlier one are dropped.
pub fn generate_questions(
    topic: &str,
    schema: &SchemaDescriptor,
    ctx: &StageContext<'_>,
    max_n: usize,
) -> Result<Vec<String>, DatagenError> {
    let vars = BTreeMap::from([
        ("topic", topic.to_string()),
        ("schema", schema.render()),
        ("dialect", schema.dialect().display_name().to_string()),
        ("max_questions", max_n.to_string()),
    ]);
    let reply = ctx
        .ask("questions", &vars, schema.dialect(), CREATIVE_TEMPERATURE)
        .map_err(llm_err(Stage::Questions))?;
    let mut accepted: Vec<String> = Vec::new();
    for item in parse_list(&reply) {
        if accepted.len() == max_n || is_stop_marker(&item) {
            break;
        }
        if tokens(&item).is_empty() {
            continue;
        }
        let repetitive = accepted
            .iter()
            .any(|q| jaccard_similarity(q, &item) > REPETITION_THRESHOLD);
        if !repetitive {
            accepted.push(item);
        }
    }
    Ok(accepted)
}

/// The contents of the first fenced code block, or the whole reply, trimmed.
pub fn extract_sql(reply: &str) -> Option<String> {
    let sql = match reply.find("```") {
        Some(start) => {
            let after = &reply[start + 3..];
            // Skip the language tag on the opening fence line.
            let body = after.split_once('\n').map_or("", |(_, body)| body);
            body.split("```").next().unwrap_or(body)
        }
        None => reply,
    };
    let sql = sql.trim();
    (!sql.is_empty()).then(|| sql.to_string())
}

pub fn generate_sql(
    question: &str,
    schema: &SchemaDescriptor,
    ctx: &StageContext<'_>,
) -> Result<String, DatagenError> {
    if question.trim().is_empty() {
        return Err(DatagenError::InvalidConfig("question must not be empty".into()));
    }
    let vars = BTreeMap::from([
        ("question", question.to_string()),
        ("schema", schema.render()),
        ("dialect", schema.dialect().display_name().to_string()),
    ]);
    let reply = ctx
        .ask("sql", &vars, schema.dialect(), DETERMINISTIC_TEMPERATURE)
        .map_err(llm_err(Stage::Sql))?;
    extract_sql(&reply).ok_or(DatagenError::EmptyCompletion)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HealOutcome {
    /// `attempts_used` counts repair rounds; 0 means the original SQL worked.
    Healed {
        sql: String,
        attempts_used: u32,
        table: ResultTable,
        /// Failure message of each repair round, in order.
        failures: Vec<String>,
    },
    Dropped {
        last_failure: String,
        failures: Vec<String>,
    },
}

/// Runs `sql`; on an engine error, timeout or empty result asks the model
/// for a repair and tries again, for at most `max_attempts` repair rounds.
pub fn heal_query(
    question: &str,
    sql: &str,
    schema: &SchemaDescriptor,
    executor: &dyn QueryExecutor,
    ctx: &StageContext<'_>,
    max_attempts: u32,
) -> Result<HealOutcome, DatagenError> {
    if max_attempts < 1 {
        return Err(DatagenError::InvalidConfig(
            "max_attempts must be at least 1".into(),
        ));
    }
    let run = |sql: &str| {
        executor.run(sql).map_err(|source| DatagenError::Runner {
            stage: Stage::Heal,
            source,
        })
    };
    let mut current = sql.to_string();
    let mut failures = Vec::new();
    let mut outcome = run(&current)?;
    for round in 0..=max_attempts {
        let failure = match (&outcome, outcome.failure_reason()) {
            (_, None) => {
                let table = outcome.table().expect("success has a table").clone();
                return Ok(HealOutcome::Healed {
                    sql: current,
                    attempts_used: round,
                    table,
                    failures,
                });
            }
            (_, Some(reason)) => reason,
        };
        failures.push(failure.clone());
        if round == max_attempts {
            break;
        }
        let vars = BTreeMap::from([
            ("question", question.to_string()),
            ("schema", schema.render()),
            ("dialect", schema.dialect().display_name().to_string()),
            ("sql", current.clone()),
            ("error", failure),
        ]);
        let reply = ctx
            .ask("heal", &vars, schema.dialect(), DETERMINISTIC_TEMPERATURE)
            .map_err(llm_err(Stage::Heal))?;
        match extract_sql(&reply) {
            Some(fixed) => {
                current = fixed;
                outcome = run(&current)?;
            }
            None => {
                outcome = crate::runner::ExecutionOutcome::EngineError {
                    message: "model returned no SQL".into(),
                    duration_secs: 0.0,
                };
            }
        }
    }
    Ok(HealOutcome::Dropped {
        last_failure: failures.last().cloned().unwrap_or_default(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Drop(String),
}

fn parse_verdict(reply: &str) -> Option<FilterDecision> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = line.trim_matches(|c: char| c == '*' || c == '`' || c == '"');
    let upper = line.to_ascii_uppercase();
    if let Some(rest) = upper.strip_prefix("KEEP") {
        return rest
            .chars()
            .all(|c| !c.is_alphanumeric())
            .then_some(FilterDecision::Keep);
    }
    if upper.starts_with("DROP") {
        let rest = &line[4..];
        if rest.chars().next().is_some_and(char::is_alphanumeric) {
            return None;
        }
        let reason = rest.trim_start_matches([':', '-', ' ', '\t']).trim();
        let reason = if reason.is_empty() {
            "no reason given"
        } else {
            reason
        };
        return Some(FilterDecision::Drop(reason.to_string()));
    }
    None
}

/// Asks the judge whether a result fits its question. Unparseable replies
/// are retried once and then treated as a drop.
pub fn plausibility_filter(
    question: &str,
    preview: &ResultPreview,
    schema: &SchemaDescriptor,
    ctx: &StageContext<'_>,
) -> Result<FilterDecision, DatagenError> {
    let vars = BTreeMap::from([("question", question.to_string()), ("preview", preview.render())]);
    for _ in 0..2 {
        let reply = ctx
            .ask("judge", &vars, schema.dialect(), DETERMINISTIC_TEMPERATURE)
            .map_err(llm_err(Stage::Filter))?;
        if let Some(decision) = parse_verdict(&reply) {
            return Ok(decision);
        }
    }
    Ok(FilterDecision::Drop(UNPARSEABLE_JUDGE.to_string()))
}

/// Up to `max_rewrites` reformulations, none equal (after normalization) to
/// the original or to each other.
pub fn paraphrase(
    question: &str,
    schema: &SchemaDescriptor,
    ctx: &StageContext<'_>,
    max_rewrites: usize,
) -> Result<Vec<String>, DatagenError> {
    if max_rewrites == 0 {
        return Ok(Vec::new());
    }
    let vars = BTreeMap::from([
        ("question", question.to_string()),
        ("max_rewrites", max_rewrites.to_string()),
    ]);
    let reply = ctx
        .ask("paraphrase", &vars, schema.dialect(), CREATIVE_TEMPERATURE)
        .map_err(llm_err(Stage::Paraphrase))?;
    let mut seen = HashSet::from([normalize_text(question)]);
    Ok(parse_list(&reply)
        .into_iter()
        .filter(|r| seen.insert(normalize_text(r)))
        .take(max_rewrites)
        .collect())
}
