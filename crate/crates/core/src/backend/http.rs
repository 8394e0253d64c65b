//! Chat-completions HTTP backend. The rendered prompt is sent as a single
//! user message.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendError, GenerationRequest, TextBackend};

pub const DEFAULT_API_KEY_ENV: &str = "SURVEYSIM_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub api_key_env: String,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout: Duration::from_secs(180),
        }
    }
}

pub struct HttpBackend {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: &HttpConfig, api_key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: api_key.into(),
            agent,
        }
    }

    /// Read the credential from the configured environment variable.
    pub fn from_env(config: &HttpConfig) -> Result<Self, BackendError> {
        match std::env::var(&config.api_key_env) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(config, key.trim())),
            _ => Err(BackendError::Authentication(format!(
                "environment variable {} is not set",
                config.api_key_env
            ))),
        }
    }
}

impl TextBackend for HttpBackend {
    fn backend_id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        });
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Authentication(truncate(&text))),
            429 => return Err(BackendError::RateLimited(truncate(&text))),
            500..=599 => {
                return Err(BackendError::Transport(format!(
                    "HTTP {status}: {}",
                    truncate(&text)
                )))
            }
            _ => {
                return Err(BackendError::Api {
                    status,
                    message: truncate(&text),
                })
            }
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| BackendError::Api {
            status,
            message: format!("unexpected response body: {e}"),
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|t| !t.trim().is_empty())
            .ok_or(BackendError::EmptyResponse)
    }
}

fn truncate(s: &str) -> String {
    const MAX: usize = 300;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}
