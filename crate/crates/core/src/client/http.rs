use std::fs::{File, OpenOptions};
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendConfig, ClientError, ModelReply, TokenUsage};
use crate::prompt::{ImageRef, PromptElement, PromptSequence};

/// How grid images travel to the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageTransport {
    /// `data:image/png;base64,...` URLs.
    #[default]
    Inline,
    /// `file://` URLs, for servers sharing the filesystem.
    FileUrl,
}

#[derive(Debug, Serialize)]
struct Attempt {
    attempt: u32,
    status: Option<u16>,
    error: Option<String>,
    elapsed_s: f64,
}

#[derive(Debug, Serialize)]
struct AuditRecord<'a> {
    model: &'a str,
    endpoint: &'a str,
    attempts: Vec<Attempt>,
    latency_s: f64,
    request: Value,
    reply: Option<&'a str>,
    error: Option<String>,
}

enum Failure {
    Transient { timeout: bool, message: String },
    Fatal(String),
}

/// Blocking client for OpenAI-compatible `/chat/completions` endpoints.
pub struct HttpBackend {
    cfg: BackendConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
    jitter: Mutex<ChaCha8Rng>,
    audit: Option<Mutex<File>>,
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, ClientError> {
        cfg.validate()?;
        let token = match &cfg.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ClientError::Config(format!("auth token variable `{var}` is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        let audit = match &cfg.audit_log {
            Some(path) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| ClientError::Config(format!("audit log {}: {e}", path.display())))?,
            )),
            None => None,
        };
        let jitter = Mutex::new(ChaCha8Rng::seed_from_u64(cfg.seed));
        Ok(Self {
            cfg,
            client,
            token,
            jitter,
            audit,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    fn image_url(&self, image: &ImageRef) -> Result<String, ClientError> {
        match (self.cfg.image_transport, image) {
            (ImageTransport::FileUrl, ImageRef::Path { path }) => {
                let abs = std::path::absolute(path).map_err(|e| ClientError::Image {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
                Ok(format!("file://{}", abs.display()))
            }
            _ => image.data_url().map_err(|e| ClientError::Image {
                path: match image {
                    ImageRef::Path { path } => path.clone(),
                    ImageRef::Inline { .. } => "<inline>".into(),
                },
                reason: e.to_string(),
            }),
        }
    }

    /// Request body: one user message whose content parts follow the prompt order.
    pub fn request_body(&self, seq: &PromptSequence) -> Result<Value, ClientError> {
        let mut parts = Vec::new();
        for el in seq.content_parts() {
            parts.push(match el {
                PromptElement::Text { text } => json!({"type": "text", "text": text}),
                PromptElement::Image(img) => {
                    json!({"type": "image_url", "image_url": {"url": self.image_url(&img)?}})
                }
            });
        }
        let mut messages = Vec::new();
        if let Some(system) = seq.system_text() {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": parts}));
        let mut body = json!({
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "messages": messages,
        });
        if let Some(max) = self.cfg.max_tokens {
            body["max_tokens"] = json!(max);
        }
        Ok(body)
    }

    fn attempt(&self, body: &Value) -> Result<(String, Option<TokenUsage>), (Option<u16>, Failure)> {
        let mut req = self.client.post(&self.cfg.endpoint_url).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            (
                None,
                Failure::Transient {
                    timeout: e.is_timeout(),
                    message: e.to_string(),
                },
            )
        })?;
        let status = resp.status();
        let code = Some(status.as_u16());
        let text = resp.text().map_err(|e| {
            (
                code,
                Failure::Transient {
                    timeout: e.is_timeout(),
                    message: e.to_string(),
                },
            )
        })?;
        if status.is_server_error() || status.as_u16() == 429 || status.as_u16() == 408 {
            return Err((
                code,
                Failure::Transient {
                    timeout: false,
                    message: format!("HTTP {status}: {}", snippet(&text)),
                },
            ));
        }
        if !status.is_success() {
            return Err((code, Failure::Fatal(format!("HTTP {status}: {}", snippet(&text)))));
        }
        parse_completion(&text).map_err(|m| (code, Failure::Fatal(m)))
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let jitter: f64 = self
            .jitter
            .lock()
            .expect("jitter rng poisoned")
            .gen_range(0.5..1.0);
        let secs = self.cfg.backoff_base_s * 2f64.powi(attempt as i32) * jitter;
        Duration::from_secs_f64(secs)
    }

    fn log(&self, record: &AuditRecord) {
        if let Some(file) = &self.audit {
            let mut line = serde_json::to_vec(record).expect("audit record serializes");
            line.push(b'\n');
            let mut f = file.lock().expect("audit log poisoned");
            if let Err(e) = f.write_all(&line) {
                log::warn!("failed to write audit log: {e}");
            }
        }
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

fn parse_completion(text: &str) -> Result<(String, Option<TokenUsage>), String> {
    #[derive(Deserialize)]
    struct Usage {
        prompt_tokens: Option<u64>,
        completion_tokens: Option<u64>,
    }
    #[derive(Deserialize)]
    struct Message {
        content: Value,
    }
    #[derive(Deserialize)]
    struct Choice {
        message: Message,
    }
    #[derive(Deserialize)]
    struct Completion {
        choices: Vec<Choice>,
        usage: Option<Usage>,
    }
    let c: Completion =
        serde_json::from_str(text).map_err(|e| format!("unexpected response body: {e}"))?;
    let choice = c.choices.into_iter().next().ok_or("response has no choices")?;
    let reply = match choice.message.content {
        Value::String(s) => s,
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        Value::Null => String::new(),
        other => return Err(format!("unexpected message content: {other}")),
    };
    let usage = c.usage.and_then(|u| {
        Some(TokenUsage {
            prompt: u.prompt_tokens?,
            completion: u.completion_tokens?,
        })
    });
    Ok((reply, usage))
}

/// Copy of a request body with image payloads replaced by their size.
fn redact(body: &Value) -> Value {
    match body {
        Value::String(s) if s.starts_with("data:") => {
            Value::String(format!("<data url, {} bytes>", s.len()))
        }
        Value::Array(a) => Value::Array(a.iter().map(redact).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), redact(v))).collect()),
        other => other.clone(),
    }
}

impl Backend for HttpBackend {
    fn send(&self, seq: &PromptSequence) -> Result<ModelReply, ClientError> {
        let body = self.request_body(seq)?;
        let started = Instant::now();
        let mut attempts = Vec::new();
        let mut last_timeout = false;
        let mut last_message = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            let t0 = Instant::now();
            let result = self.attempt(&body);
            let elapsed_s = t0.elapsed().as_secs_f64();
            match result {
                Ok((text, token_usage)) => {
                    attempts.push(Attempt {
                        attempt,
                        status: Some(200),
                        error: None,
                        elapsed_s,
                    });
                    let latency_s = started.elapsed().as_secs_f64();
                    self.log(&AuditRecord {
                        model: &self.cfg.model_name,
                        endpoint: &self.cfg.endpoint_url,
                        attempts,
                        latency_s,
                        request: redact(&body),
                        reply: Some(&text),
                        error: None,
                    });
                    return Ok(ModelReply {
                        text,
                        latency_s,
                        token_usage,
                    });
                }
                Err((status, failure)) => {
                    let (fatal, message) = match failure {
                        Failure::Fatal(m) => (true, m),
                        Failure::Transient { timeout, message } => {
                            last_timeout = timeout;
                            (false, message)
                        }
                    };
                    log::debug!("attempt {attempt} failed: {message}");
                    attempts.push(Attempt {
                        attempt,
                        status,
                        error: Some(message.clone()),
                        elapsed_s,
                    });
                    last_message = message;
                    if fatal {
                        last_timeout = false;
                        break;
                    }
                }
            }
        }
        self.log(&AuditRecord {
            model: &self.cfg.model_name,
            endpoint: &self.cfg.endpoint_url,
            attempts,
            latency_s: started.elapsed().as_secs_f64(),
            request: redact(&body),
            reply: None,
            error: Some(last_message.clone()),
        });
        if last_timeout {
            Err(ClientError::TimeoutError(last_message))
        } else {
            Err(ClientError::BackendError(last_message))
        }
    }
}
