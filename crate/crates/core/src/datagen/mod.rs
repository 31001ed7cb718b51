//! Synthetic dataset generation: topics, questions, SQL, self-healing,
//! plausibility filtering, paraphrasing, de-duplication and the train/test split.

mod pipeline;
mod split;
mod stages;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::llm::{canonical_json, ChatMessage, ChatRequest, LlmClient, LlmError, PromptLibrary};
use crate::model::{DialectTag, ModelError};
use crate::runner::RunnerError;

pub use pipeline::{run_pipeline, DatasetManifest, RunOptions, RunStatus, StageLogEntry};
pub use split::split_dataset;
pub use stages::{
    expand_topics, extract_sql, generate_questions, generate_sql, heal_query, jaccard_similarity,
    normalize_text, paraphrase, parse_list, plausibility_filter, FilterDecision, HealOutcome,
    MAX_TOPIC_CALLS, REPETITION_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Topics,
    Questions,
    Sql,
    Heal,
    Filter,
    Paraphrase,
    Dedup,
    Split,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error("{stage} stage: model call failed: {source}")]
    Llm {
        stage: Stage,
        #[source]
        source: LlmError,
    },
    #[error("{stage} stage: query execution failed: {source}")]
    Runner {
        stage: Stage,
        #[source]
        source: RunnerError,
    },
    #[error("topics stage: only {have} of {target} topics after {calls} model calls")]
    GenerationExhausted {
        have: usize,
        target: usize,
        calls: usize,
    },
    #[error("sql stage: model returned no SQL")]
    EmptyCompletion,
    #[error("output: {0}")]
    Output(#[from] ModelError),
}

impl DatagenError {
    pub fn stage(&self) -> Stage {
        match self {
            DatagenError::InvalidConfig(_) => Stage::Topics,
            DatagenError::Llm { stage, .. } | DatagenError::Runner { stage, .. } => *stage,
            DatagenError::GenerationExhausted { .. } => Stage::Topics,
            DatagenError::EmptyCompletion => Stage::Sql,
            DatagenError::Output(_) => Stage::Output,
        }
    }
}

fn default_seed_topics() -> Vec<String> {
    [
        "Customer demographics",
        "Order seasonality",
        "Product profitability",
        "Customer retention and repeat purchases",
        "Sales by product category",
    ]
    .map(String::from)
    .to_vec()
}

/// Every knob of a generation run. The defaults reproduce the published
/// run's shape: 5 seed themes grown to 90, up to 10 questions per theme,
/// 5 repair rounds, 4 rewrites and an 80/20 split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed_topics: Vec<String>,
    pub target_topic_count: usize,
    /// Extra topics generated for the schemas listed in `extra_topics_for`.
    pub extra_topic_count: usize,
    pub extra_topics_for: Vec<String>,
    pub max_questions_per_topic: usize,
    pub max_heal_attempts: u32,
    pub max_rewrites: usize,
    pub split_ratio: f64,
    pub rng_seed: u64,
    pub dialects: Vec<DialectTag>,
    pub model: String,
    pub max_tokens: u32,
    /// Topics and questions processed in parallel.
    pub concurrency: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed_topics: default_seed_topics(),
            target_topic_count: 90,
            extra_topic_count: 10,
            extra_topics_for: vec!["retail_extended".into()],
            max_questions_per_topic: 10,
            max_heal_attempts: 5,
            max_rewrites: 4,
            split_ratio: 0.8,
            rng_seed: 42,
            dialects: vec![DialectTag::Generic],
            model: "gpt-4-0314".into(),
            max_tokens: 1024,
            concurrency: 4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |msg: &str| Err(DatagenError::InvalidConfig(msg.to_string()));
        if self.seed_topics.iter().all(|t| t.trim().is_empty()) {
            return bad("seed_topics must not be empty");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must lie strictly between 0 and 1");
        }
        if self.max_heal_attempts < 1 {
            return bad("max_heal_attempts must be at least 1");
        }
        if self.max_questions_per_topic < 1 {
            return bad("max_questions_per_topic must be at least 1");
        }
        if self.max_rewrites > crate::model::MAX_FAMILY_SIZE - 1 {
            return bad("max_rewrites must be at most 4");
        }
        if self.dialects.is_empty() {
            return bad("dialects must not be empty");
        }
        if self.target_topic_count < 1 {
            return bad("target_topic_count must be at least 1");
        }
        Ok(())
    }

    pub fn topic_target(&self, schema_id: &str) -> usize {
        if self.extra_topics_for.iter().any(|s| s == schema_id) {
            self.target_topic_count + self.extra_topic_count
        } else {
            self.target_topic_count
        }
    }

    /// SHA-256 of the key-sorted JSON encoding.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical_json(&value).as_bytes()))
    }
}

/// Per-stage counters of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub topics_generated: usize,
    pub questions_generated: usize,
    pub sql_generated: usize,
    pub healed: usize,
    pub dropped_unhealed: usize,
    pub dropped_by_filter: usize,
    pub rewrites_generated: usize,
    pub unique_pairs: usize,
    pub total_pairs: usize,
    pub train_count: usize,
    pub test_count: usize,
}

impl PipelineStats {
    /// Checks the conservation identities between counters.
    pub fn check(&self) -> Result<(), String> {
        if self.total_pairs != self.unique_pairs + self.rewrites_generated {
            return Err(format!(
                "total_pairs {} != unique_pairs {} + rewrites_generated {}",
                self.total_pairs, self.unique_pairs, self.rewrites_generated
            ));
        }
        if self.train_count + self.test_count != self.total_pairs {
            return Err(format!(
                "train {} + test {} != total_pairs {}",
                self.train_count, self.test_count, self.total_pairs
            ));
        }
        if self.questions_generated != self.dropped_unhealed + self.dropped_by_filter + self.unique_pairs {
            return Err(format!(
                "questions_generated {} != dropped_unhealed {} + dropped_by_filter {} + unique_pairs {}",
                self.questions_generated, self.dropped_unhealed, self.dropped_by_filter, self.unique_pairs
            ));
        }
        Ok(())
    }
}

/// What every stage needs to talk to the model.
#[derive(Clone, Copy)]
pub struct StageContext<'a> {
    pub client: &'a LlmClient,
    pub prompts: &'a PromptLibrary,
    pub model: &'a str,
    pub max_tokens: u32,
}

impl<'a> StageContext<'a> {
    pub fn new(client: &'a LlmClient, prompts: &'a PromptLibrary, config: &'a PipelineConfig) -> Self {
        Self {
            client,
            prompts,
            model: &config.model,
            max_tokens: config.max_tokens,
        }
    }

    /// Renders `template` as the user turn under the system prompt and returns the reply text.
    fn ask(
        &self,
        template: &str,
        vars: &BTreeMap<&str, String>,
        dialect: DialectTag,
        temperature: f64,
    ) -> Result<String, LlmError> {
        let system_vars = BTreeMap::from([("dialect", dialect.display_name().to_string())]);
        let request = ChatRequest {
            model: self.model.to_string(),
            messages: vec![
                ChatMessage::system(self.prompts.render("system", &system_vars)?),
                ChatMessage::user(self.prompts.render(template, vars)?),
            ],
            temperature,
            max_tokens: self.max_tokens,
        };
        Ok(self.client.complete(&request)?.content)
    }
}
