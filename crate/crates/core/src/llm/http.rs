use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendFailure, ChatBackend, ChatRequest};

pub const BASE_URL_ENV: &str = "RE2_LLM_BASE_URL";
pub const API_KEY_ENV: &str = "RE2_LLM_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

/// Chat-completions-compatible HTTP backend.
pub struct HttpChatBackend {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl HttpChatBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            agent,
        }
    }

    /// Reads `RE2_LLM_BASE_URL` and `RE2_LLM_API_KEY`.
    pub fn from_env() -> Self {
        let base = std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(base, key, Duration::from_secs(120))
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

pub(crate) fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendFailure> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let mut req = self.agent.post(&self.endpoint());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| BackendFailure {
            status: None,
            message: e.to_string(),
            transient: true,
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendFailure {
            status: Some(status),
            message: e.to_string(),
            transient: true,
        })?;
        if !(200..300).contains(&status) {
            return Err(BackendFailure {
                status: Some(status),
                message: text.chars().take(500).collect(),
                transient: is_transient_status(status),
            });
        }
        let parsed: CompletionResponse = serde_json::from_str(&text).map_err(|e| BackendFailure {
            status: Some(status),
            message: format!("malformed completion body: {e}"),
            transient: false,
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendFailure {
                status: Some(status),
                message: "completion had no message content".into(),
                transient: false,
            })
    }
}
