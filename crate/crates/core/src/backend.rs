//! Text-generation backends.
//!
//! [`HttpChatBackend`] speaks the OpenAI-compatible chat-completions
//! protocol:
//!
//! ```text
//! POST {endpoint}
//! { "model": ..., "messages": [{"role": "system", ...}, {"role": "user", "content": prompt}],
//!   "temperature": t, "n": k, "max_tokens": m }
//! -> { "choices": [{"message": {"content": "..."}}, ...] }
//! ```
//!
//! The other backends serve scripted, closure-computed or replayed outputs
//! for offline runs and tests.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub prompt: String,
    pub temperature: f64,
    /// Number of independent completions wanted.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, temperature: f64, n: usize) -> Self {
        GenerationRequest { system: None, prompt: prompt.into(), temperature, n, max_tokens: None }
    }

    /// Stable digest of the request, used as a replay key.
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system.as_deref().unwrap_or("").as_bytes());
        h.update([0]);
        h.update(self.prompt.as_bytes());
        h.update([0]);
        h.update(format!("{:.3}/{}/{:?}", self.temperature, self.n, self.max_tokens).as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("no scripted output left for request")]
    Exhausted,
    #[error("no recorded output for request {0}")]
    Missing(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<BackendError> },
    #[error("backend I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl BackendError {
    fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

pub trait GenerationBackend {
    /// Returns exactly `req.n` completions.
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError>;
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for &mut B {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        (**self).generate(req)
    }
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for Box<B> {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        (**self).generate(req)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn default_timeout_s() -> u64 {
    120
}

pub struct HttpChatBackend {
    config: HttpBackendConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let api_key = config.api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        HttpChatBackend { config, api_key, agent }
    }

    pub fn request_body(&self, req: &GenerationRequest, n: usize) -> Value {
        let mut messages = Vec::new();
        if let Some(s) = &req.system {
            messages.push(json!({"role": "system", "content": s}));
        }
        messages.push(json!({"role": "user", "content": req.prompt}));
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": req.temperature,
            "n": n,
        });
        if let Some(m) = req.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }

    fn call(&self, body: &Value) -> Result<Vec<String>, BackendError> {
        let mut r = self.agent.post(&self.config.endpoint).header("Accept", "application/json");
        if let Some(k) = &self.api_key {
            r = r.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = r
            .content_type("application/json")
            .send(body.to_string())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let code = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&code) {
            return Err(BackendError::Status { code, body: text });
        }
        parse_chat_response(&text)
    }
}

/// Extracts `choices[*].message.content` from a chat-completions response.
pub fn parse_chat_response(text: &str) -> Result<Vec<String>, BackendError> {
    let v: Value = serde_json::from_str(text).map_err(|e| BackendError::Protocol(e.to_string()))?;
    let choices = v
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::Protocol("response has no `choices` array".into()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .or_else(|| c.get("text"))
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| BackendError::Protocol("choice without message content".into()))
        })
        .collect()
}

impl GenerationBackend for HttpChatBackend {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let mut out = Vec::with_capacity(req.n);
        // Some servers ignore `n`; keep asking until enough choices arrived.
        while out.len() < req.n {
            let got = self.call(&self.request_body(req, req.n - out.len()))?;
            if got.is_empty() {
                return Err(BackendError::Protocol("empty `choices` array".into()));
            }
            out.extend(got);
        }
        out.truncate(req.n);
        Ok(out)
    }
}

/// Retries transient failures (transport errors, HTTP 429 and 5xx).
pub struct RetryBackend<B> {
    pub inner: B,
    pub max_attempts: u32,
    pub backoff: Duration,
}

impl<B> RetryBackend<B> {
    pub fn new(inner: B, max_attempts: u32, backoff: Duration) -> Self {
        RetryBackend { inner, max_attempts: max_attempts.max(1), backoff }
    }
}

impl<B: GenerationBackend> GenerationBackend for RetryBackend<B> {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.inner.generate(req) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < self.max_attempts => {
                    log::warn!("generation attempt {attempt} failed: {e}; retrying");
                    std::thread::sleep(self.backoff * attempt);
                }
                Err(e) if attempt > 1 => {
                    return Err(BackendError::RetriesExhausted { attempts: attempt, last: Box::new(e) })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Hands out queued outputs in order and records every request.
#[derive(Debug, Default, Clone)]
pub struct ScriptedBackend {
    pub outputs: VecDeque<String>,
    pub requests: Vec<GenerationRequest>,
}

impl ScriptedBackend {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(outputs: I) -> Self {
        ScriptedBackend { outputs: outputs.into_iter().map(Into::into).collect(), requests: Vec::new() }
    }
}

impl GenerationBackend for ScriptedBackend {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        self.requests.push(req.clone());
        if self.outputs.len() < req.n {
            return Err(BackendError::Exhausted);
        }
        Ok(self.outputs.drain(..req.n).collect())
    }
}

/// Computes each completion with a closure `(request, sample index)`.
pub struct FnBackend<F> {
    pub f: F,
    pub calls: usize,
}

impl<F> FnBackend<F>
where
    F: FnMut(&GenerationRequest, usize) -> Result<String, BackendError>,
{
    pub fn new(f: F) -> Self {
        FnBackend { f, calls: 0 }
    }
}

impl<F> GenerationBackend for FnBackend<F>
where
    F: FnMut(&GenerationRequest, usize) -> Result<String, BackendError>,
{
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        self.calls += 1;
        (0..req.n).map(|i| (self.f)(req, i)).collect()
    }
}

/// Replays outputs keyed by [`GenerationRequest::key`]; optionally records
/// misses from an inner backend.
#[derive(Default)]
pub struct ReplayBackend {
    pub responses: BTreeMap<String, Vec<String>>,
    pub recorder: Option<Box<dyn GenerationBackend>>,
}

#[derive(Serialize, Deserialize)]
struct ReplayFile {
    format: String,
    version: u32,
    responses: BTreeMap<String, Vec<String>>,
}

const REPLAY_FORMAT: &str = "planhint-generation-replay";

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file: ReplayFile = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| BackendError::Protocol(format!("replay file: {e}")))?;
        if file.format != REPLAY_FORMAT || file.version != 1 {
            return Err(BackendError::Protocol(format!("unsupported replay file `{}` v{}", file.format, file.version)));
        }
        Ok(ReplayBackend { responses: file.responses, recorder: None })
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let file = ReplayFile { format: REPLAY_FORMAT.into(), version: 1, responses: self.responses.clone() };
        std::fs::write(path, serde_json::to_string_pretty(&file).expect("replay serializes") + "\n")?;
        Ok(())
    }
}

impl GenerationBackend for ReplayBackend {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let key = req.key();
        if let Some(v) = self.responses.get(&key) {
            return Ok(v.clone());
        }
        match &mut self.recorder {
            Some(inner) => {
                let v = inner.generate(req)?;
                self.responses.insert(key, v.clone());
                Ok(v)
            }
            None => Err(BackendError::Missing(key)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_hands_out_in_order() {
        let mut b = ScriptedBackend::new(["a", "b", "c"]);
        assert_eq!(b.generate(&GenerationRequest::new("p", 1.0, 2)).unwrap(), vec!["a", "b"]);
        assert!(matches!(b.generate(&GenerationRequest::new("p", 1.0, 2)), Err(BackendError::Exhausted)));
        assert_eq!(b.requests.len(), 2);
    }

    #[test]
    fn retry_only_transient() {
        let mut failures = 2;
        let flaky = FnBackend::new(move |_, _| {
            if failures > 0 {
                failures -= 1;
                Err(BackendError::Status { code: 503, body: String::new() })
            } else {
                Ok("ok".into())
            }
        });
        let mut r = RetryBackend::new(flaky, 3, Duration::ZERO);
        assert_eq!(r.generate(&GenerationRequest::new("p", 0.0, 1)).unwrap(), vec!["ok"]);
        let mut r = RetryBackend::new(FnBackend::new(|_, _| Err(BackendError::Transport("down".into()))), 2, Duration::ZERO);
        assert!(matches!(
            r.generate(&GenerationRequest::new("p", 0.0, 1)),
            Err(BackendError::RetriesExhausted { attempts: 2, .. })
        ));
        let mut r = RetryBackend::new(FnBackend::new(|_, _| Err(BackendError::Status { code: 400, body: "bad".into() })), 5, Duration::ZERO);
        assert!(matches!(r.generate(&GenerationRequest::new("p", 0.0, 1)), Err(BackendError::Status { code: 400, .. })));
    }

    #[test]
    fn chat_response_parsing() {
        let out = parse_chat_response(r#"{"choices":[{"message":{"role":"assistant","content":"1"}},{"text":"2"}]}"#).unwrap();
        assert_eq!(out, vec!["1", "2"]);
        assert!(parse_chat_response(r#"{"error":"x"}"#).is_err());
    }

    #[test]
    fn request_body_shape() {
        let b = HttpChatBackend::new(HttpBackendConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            api_key_env: None,
            timeout_s: 1,
        });
        let mut req = GenerationRequest::new("hello", 1.0, 16);
        req.system = Some("sys".into());
        req.max_tokens = Some(256);
        let body = b.request_body(&req, 16);
        assert_eq!(body["messages"][1]["content"], "hello");
        assert_eq!(body["n"], 16);
        assert_eq!(body["max_tokens"], 256);
    }

    #[test]
    fn replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.json");
        let mut rec = ReplayBackend { responses: BTreeMap::new(), recorder: Some(Box::new(ScriptedBackend::new(["x"]))) };
        let req = GenerationRequest::new("q", 0.0, 1);
        assert_eq!(rec.generate(&req).unwrap(), vec!["x"]);
        rec.save(&path).unwrap();
        let mut replay = ReplayBackend::load(&path).unwrap();
        assert_eq!(replay.generate(&req).unwrap(), vec!["x"]);
        assert!(matches!(replay.generate(&GenerationRequest::new("other", 0.0, 1)), Err(BackendError::Missing(_))));
    }
}
