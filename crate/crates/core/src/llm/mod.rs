//! Chat-completion access with record/replay so that every model-dependent
//! step can run offline and deterministically.

mod cassette;
mod client;
mod prompt;
mod transport;
mod types;

pub use cassette::{Cassette, CassetteEntry};
pub use client::{ClientLimits, LlmClient};
pub use prompt::{render_template, PromptLibrary};
pub use transport::{
    LiveTransport, RecordingTransport, ReplayTransport, ScriptedTransport, Transport, API_KEY_ENV,
    BASE_URL_ENV,
};
pub use types::{canonical_json, ChatMessage, ChatRequest, ChatResponse, Role, Usage};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded response for request {key}")]
    CassetteMiss { key: String },
    #[error("scripted transport has no responses left")]
    ScriptExhausted,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("template variable {0:?} is not bound")]
    MissingVariable(String),
    #[error("malformed template: {0}")]
    Template(String),
    #[error("cassette {path}: {message}")]
    Cassette { path: String, message: String },
    #[error("{0}")]
    Config(String),
}

/// Sampling temperature for stages that judge or write SQL.
pub const DETERMINISTIC_TEMPERATURE: f64 = 0.0;
/// Sampling temperature for stages that generate topics, questions and rewrites.
pub const CREATIVE_TEMPERATURE: f64 = 0.7;
