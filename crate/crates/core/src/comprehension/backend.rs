use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::BackendConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected backend response: {0}")]
    Response(String),
    #[error("backend not configured: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Sends an ordered conversation and returns the reply text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[Message]) -> Result<String, BackendError>;
}

/// Chat-completions client over HTTP.
pub struct LiveBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    key: Option<String>,
}

impl LiveBackend {
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .or_else(|| std::env::var("ACLW_LLM_ENDPOINT").ok())
            .ok_or_else(|| BackendError::Config("set ACLW_LLM_ENDPOINT or the endpoint option".into()))?;
        let key = std::env::var(&cfg.key_env).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { client, endpoint, model: cfg.model.clone(), key })
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, messages: &[Message]) -> Result<String, BackendError> {
        let body = json!({ "model": self.model, "messages": messages, "temperature": 0 });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body: text });
        }
        reply_content(&text)
    }
}

/// `choices[0].message.content` of a chat-completions response body.
pub fn reply_content(body: &str) -> Result<String, BackendError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| BackendError::Response(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::Response(body.chars().take(200).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_first_choice() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"{}"}}]}"#;
        assert_eq!(reply_content(body).unwrap(), "{}");
        assert!(matches!(reply_content(r#"{"error":"x"}"#), Err(BackendError::Response(_))));
    }

    #[test]
    fn missing_endpoint_is_a_config_error() {
        if std::env::var("ACLW_LLM_ENDPOINT").is_err() {
            assert!(matches!(LiveBackend::from_config(&BackendConfig::default()), Err(BackendError::Config(_))));
        }
    }

    #[test]
    fn unreachable_endpoint_is_retryable() {
        let cfg = BackendConfig { endpoint: Some("http://127.0.0.1:9/v1/chat/completions".into()), ..Default::default() };
        let err = LiveBackend::from_config(&cfg).unwrap().complete(&[Message::user("hi")]).unwrap_err();
        assert!(err.is_retryable(), "{err}");
    }
}
