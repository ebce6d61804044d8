//! Minimal chat-completion client.
//!
//! Request: `{"model": ..., "messages": [{"role", "content"}, ...]}`.
//! Response: the assistant text at `choices[0].message.content`.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "LLM_ENDPOINT";
pub const ENV_MODEL: &str = "LLM_MODEL";

const BACKOFF_BASE: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    /// Chat-completion URL; empty disables the client.
    pub endpoint_url: String,
    pub model_name: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            model_name: "default".to_string(),
            timeout_ms: 30_000,
            max_retries: 2,
        }
    }
}

impl LlmClientConfig {
    /// Apply `LLM_ENDPOINT` and `LLM_MODEL` when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(url) = std::env::var(ENV_ENDPOINT) {
            self.endpoint_url = url;
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            self.model_name = model;
        }
        self
    }

    pub fn enabled(&self) -> bool {
        !self.endpoint_url.trim().is_empty()
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.timeout_ms == 0 {
            return Err(LlmError::Config("timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("LLM client misconfigured: {0}")]
    Config(String),
    #[error("LLM endpoint unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed completion response: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

/// Blocking client, cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct LlmClient {
    config: LlmClientConfig,
    agent: ureq::Agent,
    backoff_base: Duration,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient").field("config", &self.config).finish()
    }
}

impl LlmClient {
    pub fn new(config: LlmClientConfig) -> Result<Self, LlmError> {
        config.validate()?;
        if !config.enabled() {
            return Err(LlmError::Config("endpoint_url is empty".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            backoff_base: BACKOFF_BASE,
        })
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }

    /// One chat round trip, retrying transport failures and non-2xx answers
    /// with exponential backoff.
    pub fn complete(&self, system_prompt: &str, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let mut all = Vec::with_capacity(messages.len() + 1);
        all.push(ChatMessage::system(system_prompt));
        all.extend_from_slice(messages);
        let body = CompletionRequest {
            model: &self.config.model_name,
            messages: all,
        };
        let attempts = self.config.max_retries + 1;
        let mut last_failure = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
            }
            let mut response = match self.agent.post(&self.config.endpoint_url).send_json(&body) {
                Ok(r) => r,
                Err(e) => {
                    last_failure = e.to_string();
                    continue;
                }
            };
            if !response.status().is_success() {
                last_failure = format!("HTTP {}", response.status());
                continue;
            }
            let parsed: CompletionResponse = response
                .body_mut()
                .read_json()
                .map_err(|e| LlmError::Protocol(e.to_string()))?;
            return parsed
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .ok_or_else(|| LlmError::Protocol("response has no choices".into()));
        }
        Err(LlmError::Transport {
            attempts,
            message: last_failure,
        })
    }
}

/// One-shot completion with a fresh client.
pub fn llm_complete(
    config: &LlmClientConfig,
    system_prompt: &str,
    messages: &[ChatMessage],
) -> Result<String, LlmError> {
    LlmClient::new(config.clone())?.complete(system_prompt, messages)
}
