//! Clients for chat-completion and embedding HTTP services.
//!
//! The wire format is the common `{"model", "messages", "response_format"}`
//! chat exchange, so a hosted proprietary model and a locally served
//! fine-tuned model differ only in configuration.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::net::{build_agent, is_loopback_url};
use crate::ratelimit::TokenBucket;

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions (or embeddings) route.
    pub endpoint_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Zero disables rate limiting.
    #[serde(default)]
    pub requests_per_second: f64,
}

impl RemoteConfig {
    pub fn new(endpoint_url: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint_url: endpoint_url.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            requests_per_second: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RemoteError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected backend response: {0}")]
    BadResponse(String),
    #[error("environment variable `{0}` is not set")]
    MissingApiKey(String),
    #[error("offline mode forbids contacting `{0}`")]
    Offline(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub content: String,
    pub total_tokens: Option<u64>,
}

/// JSON-over-HTTP client shared by chat and embedding calls.
#[derive(Clone)]
pub struct RemoteClient {
    config: RemoteConfig,
    agent: ureq::Agent,
    bucket: Arc<TokenBucket>,
    offline: bool,
}

impl std::fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClient")
            .field("endpoint_url", &self.config.endpoint_url)
            .field("model", &self.config.model)
            .finish()
    }
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = build_agent(Duration::from_secs(config.timeout_secs), true);
        let bucket = Arc::new(TokenBucket::new(config.requests_per_second, 1));
        RemoteClient { config, agent, bucket, offline: false }
    }

    /// Refuse non-loopback endpoints.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn post(&self, body: &Value) -> Result<Value, RemoteError> {
        let url = &self.config.endpoint_url;
        if self.offline && !is_loopback_url(url) {
            return Err(RemoteError::Offline(url.clone()));
        }
        let mut request = self.agent.post(url);
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var).map_err(|_| RemoteError::MissingApiKey(var.clone()))?;
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        self.bucket.acquire();
        let mut response = request
            .send_json(body)
            .map_err(|e| RemoteError::Unreachable(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| RemoteError::Unreachable(e.to_string()))?;
        if status != 200 {
            return Err(RemoteError::Status { status, body: text });
        }
        serde_json::from_str(&text).map_err(|e| RemoteError::BadResponse(e.to_string()))
    }

    /// One chat-completion round trip. `response_format` is passed through
    /// as the request's `response_format` field.
    pub fn chat(&self, messages: &[ChatMessage], response_format: Option<&Value>) -> Result<ChatReply, RemoteError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": 0,
        });
        if let Some(format) = response_format {
            body["response_format"] = format.clone();
        }
        let reply = self.post(&body)?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| RemoteError::BadResponse("missing choices[0].message.content".into()))?
            .to_string();
        let total_tokens = reply.pointer("/usage/total_tokens").and_then(Value::as_u64);
        Ok(ChatReply { content, total_tokens })
    }

    /// Embeds a batch of texts, preserving order.
    pub fn embed(&self, inputs: &[&str]) -> Result<Vec<Vec<f64>>, RemoteError> {
        let reply = self.post(&json!({"model": self.config.model, "input": inputs}))?;
        let data = reply
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| RemoteError::BadResponse("missing data array".into()))?;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let idx = item.get("index").and_then(Value::as_u64).map(|i| i as usize).unwrap_or(pos);
            let vector = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| RemoteError::BadResponse("missing embedding".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| RemoteError::BadResponse("non-numeric embedding".into())))
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push((idx, vector));
        }
        rows.sort_by_key(|(i, _)| *i);
        if rows.len() != inputs.len() {
            return Err(RemoteError::BadResponse(format!(
                "expected {} embeddings, got {}",
                inputs.len(),
                rows.len()
            )));
        }
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

/// Builds a `response_format` value requesting JSON that matches `schema`.
pub fn json_schema_format(name: &str, schema: Value) -> Value {
    json!({
        "type": "json_schema",
        "json_schema": {"name": name, "schema": schema}
    })
}
