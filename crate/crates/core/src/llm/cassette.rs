use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

/// Recorded request/response pairs in call order.
///
/// Stored as a pretty-printed JSON array. Identical requests share a key and
/// replay in the order they were recorded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cassette {
    entries: Vec<CassetteEntry>,
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let cassette: Cassette = serde_json::from_str(&text).map_err(|e| LlmError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if let Some(bad) = cassette.entries.iter().find(|e| e.key != e.request.key()) {
            return Err(LlmError::Cassette {
                path: path.display().to_string(),
                message: format!("entry key {} does not match its request", bad.key),
            });
        }
        Ok(cassette)
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let mut text = serde_json::to_string_pretty(self).expect("cassette serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| LlmError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn push(&mut self, request: ChatRequest, response: ChatResponse) {
        self.entries.push(CassetteEntry {
            key: request.key(),
            request,
            response,
        });
    }

    pub fn entries(&self) -> &[CassetteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
