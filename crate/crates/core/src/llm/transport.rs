use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Cassette, ChatRequest, ChatResponse, LlmError, Usage};

pub const BASE_URL_ENV: &str = "T2S_LLM_BASE_URL";
pub const API_KEY_ENV: &str = "T2S_LLM_API_KEY";

/// Sends one chat request and returns one response.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// OpenAI-compatible `POST {base}/chat/completions` over HTTP.
pub struct LiveTransport {
    http: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    max_attempts: u32,
    initial_backoff: Duration,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl LiveTransport {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            http,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        })
    }

    /// Reads the endpoint and key from the named environment variables.
    pub fn from_env_vars(base_url_var: &str, api_key_var: &str) -> Result<Self, LlmError> {
        let base = std::env::var(base_url_var)
            .map_err(|_| LlmError::Config(format!("environment variable {base_url_var} is not set")))?;
        Self::new(base, std::env::var(api_key_var).ok())
    }

    pub fn from_env() -> Result<Self, LlmError> {
        Self::from_env_vars(BASE_URL_ENV, API_KEY_ENV)
    }

    pub fn with_retry(mut self, max_attempts: u32, initial_backoff: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.initial_backoff = initial_backoff;
        self
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, Attempt> {
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut call = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {text}")));
        }
        let wire: WireResponse = resp
            .json()
            .map_err(|e| Attempt::Fatal(format!("malformed response: {e}")))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Attempt::Fatal("response has no choices".into()))?;
        Ok(ChatResponse {
            content: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason.unwrap_or_else(|| "stop".into()),
            usage: wire
                .usage
                .map(|u| Usage {
                    prompt_tokens: u.prompt_tokens,
                    completion_tokens: u.completion_tokens,
                })
                .unwrap_or_default(),
        })
    }
}

impl Transport for LiveTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut backoff = self.initial_backoff;
        let mut last = String::new();
        for attempt in 1..=self.max_attempts {
            match self.attempt(request) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(msg)) => return Err(LlmError::Transport(msg)),
                Err(Attempt::Retry(msg)) => {
                    tracing::warn!(attempt, error = %msg, "chat completion failed");
                    last = msg;
                    if attempt < self.max_attempts {
                        std::thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(LlmError::Transport(format!(
            "giving up after {} attempts: {last}",
            self.max_attempts
        )))
    }
}

/// Serves responses from a cassette. The n-th identical request gets the
/// n-th recording for its key.
pub struct ReplayTransport {
    by_key: HashMap<String, Vec<usize>>,
    cassette: Cassette,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayTransport {
    pub fn new(cassette: Cassette) -> Self {
        let mut by_key: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, entry) in cassette.entries().iter().enumerate() {
            by_key.entry(entry.key.clone()).or_default().push(i);
        }
        Self {
            by_key,
            cassette,
            cursors: Mutex::new(HashMap::new()),
        }
    }
}

impl Transport for ReplayTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let key = request.key();
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let cursor = cursors.entry(key.clone()).or_insert(0);
        let index = self
            .by_key
            .get(&key)
            .and_then(|positions| positions.get(*cursor))
            .copied()
            .ok_or_else(|| LlmError::CassetteMiss { key: key.clone() })?;
        *cursor += 1;
        Ok(self.cassette.entries()[index].response.clone())
    }
}

/// Forwards to another transport and appends every exchange to a cassette,
/// saving it after each append when a path is set.
pub struct RecordingTransport {
    inner: Box<dyn Transport>,
    cassette: Mutex<Cassette>,
    path: Option<PathBuf>,
}

impl RecordingTransport {
    pub fn new(inner: Box<dyn Transport>, path: Option<PathBuf>) -> Self {
        Self {
            inner,
            cassette: Mutex::new(Cassette::new()),
            path,
        }
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.lock().expect("cassette lock").clone()
    }
}

impl Transport for RecordingTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.send(request)?;
        let mut cassette = self.cassette.lock().expect("cassette lock");
        cassette.push(request.clone(), response.clone());
        if let Some(path) = &self.path {
            cassette.save(path)?;
        }
        Ok(response)
    }
}

type Responder = Box<dyn Fn(&ChatRequest) -> Result<ChatResponse, LlmError> + Send + Sync>;

/// Programmed responses for tests: either a fixed queue served in call order
/// or a function of the request. Every request is kept for inspection.
pub struct ScriptedTransport {
    queue: Mutex<VecDeque<ChatResponse>>,
    responder: Option<Responder>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            queue: Mutex::new(responses.into_iter().map(|s| ChatResponse::text(s)).collect()),
            responder: None,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<ChatResponse, LlmError> + Send + Sync + 'static,
    {
        Self {
            queue: Mutex::new(VecDeque::new()),
            responder: Some(Box::new(f)),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("seen lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("queue lock").len()
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.seen.lock().expect("seen lock").push(request.clone());
        if let Some(f) = &self.responder {
            return f(request);
        }
        self.queue
            .lock()
            .expect("queue lock")
            .pop_front()
            .ok_or(LlmError::ScriptExhausted)
    }
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).send(request)
    }
}
