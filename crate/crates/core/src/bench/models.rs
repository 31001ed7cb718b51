use std::collections::BTreeMap;
use std::sync::Arc;

use crate::datagen::extract_sql;
use crate::llm::{ChatMessage, ChatRequest, LlmClient, PromptLibrary, DETERMINISTIC_TEMPERATURE};
use crate::model::{QuestionRecord, SchemaDescriptor};
use crate::runner::QueryExecutor;

/// A model under test: turns a question into SQL.
pub trait SqlGenerator: Send + Sync {
    fn name(&self) -> &str;

    /// Errors are per-record and reported in the audit, not raised.
    fn generate(&self, record: &QuestionRecord, schema: &SchemaDescriptor) -> Result<String, String>;
}

/// Answers with the record's own SQL.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoModel;

impl SqlGenerator for EchoModel {
    fn name(&self) -> &str {
        "echo"
    }

    fn generate(&self, record: &QuestionRecord, _: &SchemaDescriptor) -> Result<String, String> {
        Ok(record.sql.clone())
    }
}

/// Answers with the record's SQL minus its last result column.
///
/// Single-column queries get their column replaced by a constant, so every
/// answer is wrong unless the constant happens to match.
pub struct DropLastColumnModel {
    executor: Arc<dyn QueryExecutor>,
}

impl DropLastColumnModel {
    /// `executor` is used to learn the column names of each ground-truth query.
    pub fn new(executor: Arc<dyn QueryExecutor>) -> Self {
        Self { executor }
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

impl SqlGenerator for DropLastColumnModel {
    fn name(&self) -> &str {
        "drop-last-column"
    }

    fn generate(&self, record: &QuestionRecord, _: &SchemaDescriptor) -> Result<String, String> {
        let outcome = self.executor.run(&record.sql).map_err(|e| e.to_string())?;
        let table = outcome
            .table()
            .ok_or_else(|| outcome.failure_reason().unwrap_or_default())?;
        let names: Vec<&str> = table.column_names().collect();
        let kept = match names.split_last() {
            Some((_, rest)) if !rest.is_empty() => {
                rest.iter().map(|n| quote_ident(n)).collect::<Vec<_>>().join(", ")
            }
            _ => "'mutated' AS mutated".to_string(),
        };
        Ok(format!(
            "SELECT {kept}\nFROM (\n{}\n) AS truth",
            record.sql.trim().trim_end_matches(';')
        ))
    }
}

/// Any chat-completion model, prompted with the text-to-SQL template at temperature 0.
pub struct ChatModel {
    name: String,
    client: LlmClient,
    prompts: PromptLibrary,
    model: String,
    max_tokens: u32,
}

impl ChatModel {
    pub fn new(
        name: impl Into<String>,
        client: LlmClient,
        prompts: PromptLibrary,
        model: impl Into<String>,
        max_tokens: u32,
    ) -> Self {
        Self {
            name: name.into(),
            client,
            prompts,
            model: model.into(),
            max_tokens,
        }
    }
}

impl SqlGenerator for ChatModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, record: &QuestionRecord, schema: &SchemaDescriptor) -> Result<String, String> {
        let vars = BTreeMap::from([
            ("dialect", schema.dialect().display_name().to_string()),
            ("schema", schema.render()),
            ("question", record.question.clone()),
        ]);
        let prompt = self
            .prompts
            .render("text_to_sql", &vars)
            .map_err(|e| e.to_string())?;
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: DETERMINISTIC_TEMPERATURE,
            max_tokens: self.max_tokens,
        };
        let reply = self.client.complete(&request).map_err(|e| e.to_string())?;
        extract_sql(&reply.content).ok_or_else(|| "model returned no SQL".to_string())
    }
}
