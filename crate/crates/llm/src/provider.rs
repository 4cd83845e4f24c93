use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimit { attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

/// A failed attempt and whether sending the same request again might succeed.
struct Failure {
    err: LlmError,
    transient: bool,
}

impl Failure {
    fn transient(err: LlmError) -> Self {
        Failure { err, transient: true }
    }

    fn permanent(err: LlmError) -> Self {
        Failure { err, transient: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// OpenAI-style chat completion endpoint.
    #[default]
    Http,
    /// Serves a fixture file verbatim.
    Mock,
}

/// JSON pointers into the chat-completion request and response bodies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldPaths {
    pub model: String,
    pub messages: String,
    pub temperature: String,
    pub max_tokens: String,
    pub content: String,
    pub prompt_tokens: String,
    pub completion_tokens: String,
}

impl Default for FieldPaths {
    fn default() -> Self {
        FieldPaths {
            model: "/model".into(),
            messages: "/messages".into(),
            temperature: "/temperature".into(),
            max_tokens: "/max_tokens".into(),
            content: "/choices/0/message/content".into(),
            prompt_tokens: "/usage/prompt_tokens".into(),
            completion_tokens: "/usage/completion_tokens".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Label recorded in exchanges and reports.
    pub id: String,
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Environment variable holding the API key; `None` or empty sends no key.
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
    pub attempts: u32,
    /// First backoff delay; it doubles after every failed attempt.
    pub backoff_ms: u64,
    /// Response served by the mock provider.
    pub fixture: Option<PathBuf>,
    pub fields: FieldPaths,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            id: "openai".into(),
            kind: ProviderKind::Http,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4-0613".into(),
            temperature: 0.0,
            max_output_tokens: 4096,
            api_key_env: Some("OPENAI_API_KEY".into()),
            timeout_ms: 120_000,
            attempts: 3,
            backoff_ms: 1000,
            fixture: None,
            fields: FieldPaths::default(),
        }
    }
}

impl ProviderConfig {
    pub fn mock(fixture: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            id: "mock".into(),
            kind: ProviderKind::Mock,
            endpoint: String::new(),
            model: "mock".into(),
            api_key_env: None,
            fixture: Some(fixture.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: String| Err(LlmError::Config(m));
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} is outside [0, 2]", self.temperature));
        }
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be positive".into());
        }
        if self.attempts == 0 {
            return bad("attempts must be at least 1".into());
        }
        match self.kind {
            ProviderKind::Http if self.endpoint.is_empty() => bad("http provider needs an endpoint".into()),
            ProviderKind::Mock if self.fixture.is_none() => bad("mock provider needs a fixture file".into()),
            _ => Ok(()),
        }
    }

    /// Builds the configured provider, resolving the API key from the process environment.
    pub fn build(&self) -> Result<Box<dyn Provider>, LlmError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::Http => Box::new(HttpProvider::new(self.clone())?),
            ProviderKind::Mock => Box::new(MockProvider::from_file(self)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    /// Requests sent, retries included.
    pub attempts: u32,
}

pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn model(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError>;
}

pub struct MockProvider {
    id: String,
    model: String,
    response: String,
}

impl MockProvider {
    pub fn new(id: impl Into<String>, response: impl Into<String>) -> Self {
        MockProvider { id: id.into(), model: "mock".into(), response: response.into() }
    }

    pub fn from_file(cfg: &ProviderConfig) -> Result<Self, LlmError> {
        let path = cfg.fixture.as_ref().ok_or_else(|| LlmError::Config("mock provider needs a fixture file".into()))?;
        let response = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("fixture {}: {e}", path.display())))?;
        Ok(MockProvider { id: cfg.id.clone(), model: cfg.model.clone(), response })
    }
}

impl Provider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, _prompt: &str) -> Result<Completion, LlmError> {
        Ok(Completion { text: self.response.clone(), attempts: 1, ..Completion::default() })
    }
}

pub struct HttpProvider {
    cfg: ProviderConfig,
    key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, LlmError> {
        Self::with_env(cfg, |name| std::env::var(name).ok())
    }

    /// Like [`HttpProvider::new`] with a custom environment lookup.
    pub fn with_env(cfg: ProviderConfig, env: impl Fn(&str) -> Option<String>) -> Result<Self, LlmError> {
        cfg.validate()?;
        let key = match cfg.api_key_env.as_deref() {
            None | Some("") => None,
            Some(var) => match env(var) {
                Some(k) if !k.trim().is_empty() => Some(k.trim().to_string()),
                _ => return Err(LlmError::Auth(format!("environment variable {var} is not set"))),
            },
        };
        let agent = ureq::Agent::new_with_config(
            ureq::config::Config::builder().http_status_as_error(false).timeout_global(Some(Duration::from_millis(cfg.timeout_ms))).build(),
        );
        Ok(HttpProvider { cfg, key, agent })
    }

    fn request_body(&self, prompt: &str) -> Result<Value, LlmError> {
        let f = &self.cfg.fields;
        let mut body = json!({});
        for (ptr, value) in [
            (&f.model, json!(self.cfg.model)),
            (&f.messages, json!([{ "role": "user", "content": prompt }])),
            (&f.temperature, json!(self.cfg.temperature)),
            (&f.max_tokens, json!(self.cfg.max_output_tokens)),
        ] {
            insert(&mut body, ptr, value)?;
        }
        Ok(body)
    }

    fn attempt(&self, body: &Value) -> Result<Completion, Failure> {
        let mut req = self.agent.post(&self.cfg.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(network_failure)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(network_failure)?;
        let http = |status| LlmError::Transport(format!("HTTP {status}: {}", excerpt(&text)));
        match status {
            200..=299 => {}
            401 | 403 => return Err(Failure::permanent(LlmError::Auth(format!("HTTP {status}: {}", excerpt(&text))))),
            408 => return Err(Failure::transient(LlmError::Timeout { attempts: 1 })),
            429 => return Err(Failure::transient(LlmError::RateLimit { attempts: 1 })),
            500..=599 => return Err(Failure::transient(http(status))),
            _ => return Err(Failure::permanent(http(status))),
        }
        let malformed = |m: String| Failure::permanent(LlmError::Transport(m));
        let json: Value = serde_json::from_str(&text).map_err(|e| malformed(format!("response is not JSON: {e}")))?;
        let f = &self.cfg.fields;
        let content = json
            .pointer(&f.content)
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(format!("response has no string at {}", f.content)))?;
        Ok(Completion {
            text: content.to_string(),
            prompt_tokens: json.pointer(&f.prompt_tokens).and_then(Value::as_u64),
            completion_tokens: json.pointer(&f.completion_tokens).and_then(Value::as_u64),
            attempts: 1,
        })
    }
}

impl Provider for HttpProvider {
    fn id(&self) -> &str {
        &self.cfg.id
    }

    fn model(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let body = self.request_body(prompt)?;
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut attempt = 1;
        loop {
            let Failure { err, transient } = match self.attempt(&body) {
                Ok(c) => return Ok(Completion { attempts: attempt, ..c }),
                Err(f) => f,
            };
            if !transient || attempt == self.cfg.attempts {
                return Err(match err {
                    LlmError::Timeout { .. } => LlmError::Timeout { attempts: attempt },
                    LlmError::RateLimit { .. } => LlmError::RateLimit { attempts: attempt },
                    e => e,
                });
            }
            thread::sleep(delay);
            delay *= 2;
            attempt += 1;
        }
    }
}

fn network_failure(e: ureq::Error) -> Failure {
    match e {
        ureq::Error::Timeout(_) => Failure::transient(LlmError::Timeout { attempts: 1 }),
        // a request body we cannot encode will not encode next time either
        ureq::Error::Json(e) => Failure::permanent(LlmError::Transport(e.to_string())),
        e => Failure::transient(LlmError::Transport(e.to_string())),
    }
}

fn excerpt(text: &str) -> String {
    text.chars().take(200).collect()
}

/// Sets `value` at a JSON pointer, creating intermediate objects.
fn insert(root: &mut Value, pointer: &str, value: Value) -> Result<(), LlmError> {
    let Some(path) = pointer.strip_prefix('/') else {
        return Err(LlmError::Config(format!("`{pointer}` is not a JSON pointer")));
    };
    let mut node = root;
    let mut keys = path.split('/').map(|k| k.replace("~1", "/").replace("~0", "~")).peekable();
    while let Some(key) = keys.next() {
        let Value::Object(map) = node else {
            return Err(LlmError::Config(format!("`{pointer}` crosses a non-object")));
        };
        if keys.peek().is_none() {
            map.insert(key, value);
            return Ok(());
        }
        node = map.entry(key).or_insert_with(|| json!({}));
    }
    Ok(())
}
