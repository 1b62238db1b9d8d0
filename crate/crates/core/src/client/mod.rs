//! Chat-style backends: an HTTP client for OpenAI-compatible multimodal
//! endpoints and a deterministic mock that reads answers out of marker frames.

mod http;
mod mock;

pub use http::{HttpBackend, ImageTransport};
pub use mock::{MockBackend, MockOutcome};

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptSequence;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("backend error: {0}")]
    BackendError(String),
    #[error("request timed out: {0}")]
    TimeoutError(String),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("cannot read prompt image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReply {
    pub text: String,
    pub latency_s: f64,
    pub token_usage: Option<TokenUsage>,
}

pub trait Backend: Send + Sync {
    fn send(&self, seq: &PromptSequence) -> Result<ModelReply, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Environment variable holding the bearer token.
    pub auth_token_env: Option<String>,
    pub max_concurrent: usize,
    pub timeout_s: f64,
    pub retries: u32,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    /// First retry delay; later delays double, each scaled by a jitter in [0.5, 1).
    pub backoff_base_s: f64,
    pub image_transport: ImageTransport,
    /// JSON-lines audit log, one record per call.
    pub audit_log: Option<PathBuf>,
    pub seed: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "default".into(),
            auth_token_env: None,
            max_concurrent: 1,
            timeout_s: 120.0,
            retries: 3,
            temperature: 0.0,
            max_tokens: None,
            backoff_base_s: 1.0,
            image_transport: ImageTransport::Inline,
            audit_log: None,
            seed: 0,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        if self.max_concurrent == 0 {
            return Err(ClientError::Config("max_concurrent must be at least 1".into()));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(ClientError::Config("timeout must be positive".into()));
        }
        if !(self.backoff_base_s.is_finite() && self.backoff_base_s >= 0.0) {
            return Err(ClientError::Config("backoff base must be non-negative".into()));
        }
        if self.endpoint_url.trim().is_empty() {
            return Err(ClientError::Config("endpoint url is empty".into()));
        }
        Ok(())
    }
}

/// Applies `f` to every item with at most `max_concurrent` calls in flight.
/// Results come back in input order.
pub fn run_bounded<T, R, F>(items: &[T], max_concurrent: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = max_concurrent.max(1).min(items.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let out = f(item);
                slots.lock().expect("result slots poisoned")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}
