use std::sync::OnceLock;
use std::time::Duration;

use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{CompletionOptions, Provider, ProviderError};
use crate::agents::{ChatRole, PromptBundle};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    pub api_key: String,
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
}

impl OpenAiConfig {
    /// Read `PROVIDER_API_KEY`, `PROVIDER_BASE_URL` and `PROVIDER_MODEL`.
    /// Returns `None` when no key is set.
    pub fn from_env() -> Option<Self> {
        let api_key = std::env::var("PROVIDER_API_KEY").ok().filter(|k| !k.trim().is_empty())?;
        Some(OpenAiConfig {
            api_key,
            base_url: std::env::var("PROVIDER_BASE_URL")
                .ok()
                .filter(|u| !u.trim().is_empty())
                .unwrap_or_else(|| DEFAULT_BASE_URL.to_string()),
            model: std::env::var("PROVIDER_MODEL")
                .ok()
                .filter(|m| !m.trim().is_empty())
                .unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            timeout: Duration::from_secs(90),
        })
    }
}

/// Client for any OpenAI-compatible `/chat/completions` endpoint.
pub struct OpenAiProvider {
    config: OpenAiConfig,
    client: OnceLock<Result<reqwest::blocking::Client, String>>,
}

impl OpenAiProvider {
    pub fn new(config: OpenAiConfig) -> Self {
        OpenAiProvider {
            config,
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, ProviderError> {
        // built lazily: the blocking client must be created off the async runtime
        self.client
            .get_or_init(|| {
                reqwest::blocking::Client::builder()
                    .timeout(self.config.timeout)
                    .build()
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| ProviderError::Transport(e.clone()))
    }

    fn request_body(&self, bundle: &PromptBundle, options: &CompletionOptions) -> serde_json::Value {
        // the rendered system text already embeds the context document
        let mut messages = vec![json!({"role": "system", "content": bundle.system_text})];
        for message in &bundle.history {
            let role = match message.role {
                ChatRole::User => "user",
                ChatRole::Tutor => "assistant",
            };
            messages.push(json!({"role": role, "content": message.text}));
        }
        if !bundle.task_text.trim().is_empty() {
            messages.push(json!({"role": "user", "content": bundle.task_text}));
        }
        json!({
            "model": options.model.clone().unwrap_or_else(|| self.config.model.clone()),
            "messages": messages,
            "temperature": options.temperature,
            "seed": options.seed,
        })
    }

    fn send_once(&self, body: &serde_json::Value) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let response = self
            .client()?
            .post(url)
            .bearer_auth(&self.config.api_key)
            .json(body)
            .send()
            .map_err(classify_transport)?;
        let status = response.status();
        let text = response.text().map_err(classify_transport)?;
        match status {
            s if s.is_success() => extract_content(&text),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Err(ProviderError::Auth(format!("{status}: {}", truncate(&text))))
            }
            StatusCode::TOO_MANY_REQUESTS => {
                Err(ProviderError::RateLimit(format!("{status}: {}", truncate(&text))))
            }
            StatusCode::REQUEST_TIMEOUT | StatusCode::GATEWAY_TIMEOUT => {
                Err(ProviderError::Timeout(format!("{status}")))
            }
            _ => Err(ProviderError::Transport(format!("{status}: {}", truncate(&text)))),
        }
    }
}

impl Provider for OpenAiProvider {
    fn name(&self) -> &str {
        "openai-compatible"
    }

    fn complete(
        &self,
        bundle: &PromptBundle,
        options: &CompletionOptions,
    ) -> Result<String, ProviderError> {
        let body = self.request_body(bundle, options);
        match self.send_once(&body) {
            // one retry for transport-level failures only
            Err(ProviderError::Transport(_) | ProviderError::Timeout(_)) => self.send_once(&body),
            other => other,
        }
    }
}

fn classify_transport(err: reqwest::Error) -> ProviderError {
    if err.is_timeout() {
        ProviderError::Timeout(err.to_string())
    } else {
        ProviderError::Transport(err.to_string())
    }
}

fn truncate(text: &str) -> String {
    text.chars().take(300).collect()
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

fn extract_content(body: &str) -> Result<String, ProviderError> {
    let parsed: ChatResponse = serde_json::from_str(body)
        .map_err(|e| ProviderError::Transport(format!("unreadable completion body: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| ProviderError::Transport("completion has no message content".into()))
}
