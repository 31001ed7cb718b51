use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{ChatRequest, ChatResponse, LlmError, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientLimits {
    /// Concurrent requests allowed in flight.
    pub max_in_flight: usize,
    /// `None` disables rate limiting.
    pub requests_per_minute: Option<u32>,
}

impl Default for ClientLimits {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            requests_per_minute: None,
        }
    }
}

/// Chat-completion gateway shared by every pipeline stage.
///
/// Safe to call from many threads; enforces the in-flight bound and the
/// per-minute request budget before handing a request to the transport.
pub struct LlmClient {
    transport: Box<dyn Transport>,
    limits: ClientLimits,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
    recent: Mutex<VecDeque<Instant>>,
}

impl LlmClient {
    pub fn new(transport: impl Transport + 'static) -> Self {
        Self::with_limits(Box::new(transport), ClientLimits::default())
    }

    pub fn with_limits(transport: Box<dyn Transport>, limits: ClientLimits) -> Self {
        Self {
            transport,
            limits: ClientLimits {
                max_in_flight: limits.max_in_flight.max(1),
                ..limits
            },
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
            recent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        self.wait_for_rate_budget();
        {
            let mut n = self.in_flight.lock().expect("in-flight lock");
            while *n >= self.limits.max_in_flight {
                n = self.slot_freed.wait(n).expect("in-flight lock");
            }
            *n += 1;
        }
        let result = self.transport.send(request);
        *self.in_flight.lock().expect("in-flight lock") -= 1;
        self.slot_freed.notify_one();
        let response = result?;
        if response.content.is_empty() && response.finish_reason == "error" {
            return Err(LlmError::Transport("model reported an error".into()));
        }
        Ok(response)
    }

    fn wait_for_rate_budget(&self) {
        let Some(rpm) = self.limits.requests_per_minute.filter(|r| *r > 0) else {
            return;
        };
        let window = Duration::from_secs(60);
        loop {
            let mut recent = self.recent.lock().expect("rate lock");
            let now = Instant::now();
            while recent.front().is_some_and(|t| now.duration_since(*t) >= window) {
                recent.pop_front();
            }
            if recent.len() < rpm as usize {
                recent.push_back(now);
                return;
            }
            let wait = window - now.duration_since(*recent.front().expect("non-empty"));
            drop(recent);
            std::thread::sleep(wait);
        }
    }
}
