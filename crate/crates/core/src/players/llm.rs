//! Chat-completion endpoint client.
//!
//! Requests go to `{base_url}/chat/completions` with a JSON body of `model`,
//! `messages` (`role`/`content`), and optionally `temperature`, `top_p` and
//! `reasoning_effort`. The reply is read from `choices[0].message.content`,
//! with `reasoning_content` kept separately when present, and `usage`
//! token counts recorded as reported.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agent::{AgentReply, ChatMessage, DialogAgent, ModelError, ModelErrorKind, TokenUsage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    Medium,
    High,
}

impl ReasoningEffort {
    fn as_str(self) -> &'static str {
        match self {
            ReasoningEffort::Low => "low",
            ReasoningEffort::Medium => "medium",
            ReasoningEffort::High => "high",
        }
    }
}

fn default_temperature() -> f64 {
    0.3
}
fn default_top_p() -> Option<f64> {
    Some(1.0)
}
fn default_timeout() -> f64 {
    600.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Some reasoning endpoints reject the field; false leaves it out.
    #[serde(default = "yes")]
    pub send_temperature: bool,
    #[serde(default = "default_top_p")]
    pub top_p: Option<f64>,
    #[serde(default)]
    pub reasoning_effort: Option<ReasoningEffort>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Retries after transport failures or timeouts.
    #[serde(default)]
    pub max_retries: u32,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Ceiling on concurrent requests to this base URL and model.
    #[serde(default)]
    pub max_concurrency: Option<usize>,
    #[serde(default)]
    pub label: Option<String>,
}

impl LlmEndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        LlmEndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            temperature: default_temperature(),
            send_temperature: true,
            top_p: default_top_p(),
            reasoning_effort: None,
            timeout_secs: default_timeout(),
            max_retries: 0,
            api_key_env: None,
            max_concurrency: None,
            label: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::new(ModelErrorKind::Config, m.to_string()));
        if !(self.temperature >= 0.0) {
            return bad("temperature must be non-negative");
        }
        if !(self.timeout_secs > 0.0) {
            return bad("timeout must be positive");
        }
        if self.max_concurrency == Some(0) {
            return bad("max_concurrency must be positive");
        }
        Ok(())
    }

    pub fn display_name(&self) -> String {
        match (&self.label, self.reasoning_effort) {
            (Some(l), _) => l.clone(),
            (None, Some(e)) => format!("{} ({})", self.model, e.as_str()),
            (None, None) => self.model.clone(),
        }
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        let mut body = json!({ "model": self.model, "messages": messages });
        if self.send_temperature {
            body["temperature"] = json!(self.temperature);
        }
        if let Some(p) = self.top_p {
            body["top_p"] = json!(p);
        }
        if let Some(e) = self.reasoning_effort {
            body["reasoning_effort"] = json!(e.as_str());
        }
        body
    }
}

/// Counting semaphore shared by every client of one endpoint.
#[derive(Debug)]
pub struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

fn endpoint_semaphore(cfg: &LlmEndpointConfig) -> Option<Arc<Semaphore>> {
    static REGISTRY: OnceLock<Mutex<HashMap<String, Arc<Semaphore>>>> = OnceLock::new();
    let n = cfg.max_concurrency?;
    let key = format!("{}|{}", cfg.base_url, cfg.model);
    let mut map = REGISTRY.get_or_init(Default::default).lock().unwrap();
    Some(map.entry(key).or_insert_with(|| Arc::new(Semaphore::new(n))).clone())
}

pub struct ChatClient {
    cfg: LlmEndpointConfig,
    agent: ureq::Agent,
    token: Option<String>,
    limiter: Option<Arc<Semaphore>>,
}

impl ChatClient {
    pub fn new(cfg: LlmEndpointConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let token = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ModelError::new(ModelErrorKind::Config, format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = endpoint_semaphore(&cfg);
        Ok(ChatClient { cfg, agent, token, limiter })
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.cfg
    }

    fn attempt(&self, messages: &[ChatMessage]) -> Result<AgentReply, ModelError> {
        let _permit = self.limiter.as_ref().map(|s| s.acquire());
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(self.cfg.request_body(messages)).map_err(map_transport)?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if !status.is_success() {
            let snippet: String = text.chars().take(200).collect();
            return Err(ModelError::new(ModelErrorKind::Transport, format!("HTTP {}: {snippet}", status.as_u16())));
        }
        parse_completion(&text)
    }
}

fn map_transport(e: ureq::Error) -> ModelError {
    match e {
        ureq::Error::Timeout(t) => ModelError::new(ModelErrorKind::Timeout, format!("request timed out ({t})")),
        other => ModelError::new(ModelErrorKind::Transport, other.to_string()),
    }
}

/// Extracts content, reasoning and usage from a chat-completion response body.
pub fn parse_completion(body: &str) -> Result<AgentReply, ModelError> {
    let malformed = |m: &str| ModelError::new(ModelErrorKind::Malformed, m.to_string());
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(&format!("invalid JSON: {e}")))?;
    let message = v.pointer("/choices/0/message").ok_or_else(|| malformed("missing choices[0].message"))?;
    let content = match message.get("content") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(_) => return Err(malformed("content is not a string")),
    };
    let reasoning = message
        .get("reasoning_content")
        .or_else(|| message.get("reasoning"))
        .and_then(Value::as_str)
        .map(str::to_string);
    let usage = v.get("usage").filter(|u| u.is_object()).map(|u| TokenUsage {
        prompt_tokens: u.get("prompt_tokens").and_then(Value::as_u64),
        completion_tokens: u.get("completion_tokens").and_then(Value::as_u64),
        reasoning_tokens: u.pointer("/completion_tokens_details/reasoning_tokens").and_then(Value::as_u64),
    });
    Ok(AgentReply { content, reasoning, usage })
}

impl DialogAgent for ChatClient {
    fn reply(&mut self, messages: &[ChatMessage]) -> Result<AgentReply, ModelError> {
        let mut tries = 0;
        loop {
            match self.attempt(messages) {
                Err(e) if tries < self.cfg.max_retries && matches!(e.kind, ModelErrorKind::Transport | ModelErrorKind::Timeout) => {
                    tries += 1;
                }
                other => return other,
            }
        }
    }

    fn label(&self) -> String {
        self.cfg.display_name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_fields() {
        let mut cfg = LlmEndpointConfig::new("http://x", "m");
        let b = cfg.request_body(&[ChatMessage::user("hi")]);
        assert_eq!(b["model"], "m");
        assert_eq!(b["temperature"], 0.3);
        assert_eq!(b["top_p"], 1.0);
        assert_eq!(b["messages"][0]["role"], "user");
        assert!(b.get("reasoning_effort").is_none());
        cfg.send_temperature = false;
        cfg.reasoning_effort = Some(ReasoningEffort::Medium);
        let b = cfg.request_body(&[]);
        assert!(b.get("temperature").is_none());
        assert_eq!(b["reasoning_effort"], "medium");
        assert_eq!(cfg.display_name(), "m (medium)");
    }

    #[test]
    fn completion_parsing() {
        let r = parse_completion(
            r#"{"choices":[{"message":{"role":"assistant","content":"make_move e7e5","reasoning_content":"hmm"}}],
               "usage":{"prompt_tokens":10,"completion_tokens":5,"completion_tokens_details":{"reasoning_tokens":3}}}"#,
        )
        .unwrap();
        assert_eq!(r.content, "make_move e7e5");
        assert_eq!(r.reasoning.as_deref(), Some("hmm"));
        assert_eq!(r.usage.unwrap().reasoning_tokens, Some(3));
        assert_eq!(parse_completion("{}").unwrap_err().kind, ModelErrorKind::Malformed);
        assert_eq!(parse_completion("nope").unwrap_err().kind, ModelErrorKind::Malformed);
        let empty = parse_completion(r#"{"choices":[{"message":{"content":null}}]}"#).unwrap();
        assert_eq!(empty.content, "");
    }

    #[test]
    fn validation() {
        let mut cfg = LlmEndpointConfig::new("http://x", "m");
        cfg.temperature = -1.0;
        assert!(cfg.validate().is_err());
        cfg.temperature = 0.0;
        cfg.timeout_secs = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn semaphore_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let s = Semaphore::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..8 {
                scope.spawn(|| {
                    let _p = s.acquire();
                    let n = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(n, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
