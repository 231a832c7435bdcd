//! Chat-completion providers: an OpenAI-compatible HTTP client and a
//! deterministic offline mock.

mod mock;
mod openai;

use serde::{Deserialize, Serialize};

pub use mock::{MockMode, MockProvider};
pub use openai::{OpenAiConfig, OpenAiProvider};

use super::PromptBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOptions {
    pub seed: u64,
    pub temperature: f32,
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider timed out: {0}")]
    Timeout(String),
    #[error("provider rejected credentials: {0}")]
    Auth(String),
    #[error("provider rate limit reached: {0}")]
    RateLimit(String),
    #[error("provider transport failure: {0}")]
    Transport(String),
}

impl ProviderError {
    pub fn code(&self) -> &'static str {
        match self {
            ProviderError::Timeout(_) => "PROVIDER_TIMEOUT",
            ProviderError::Auth(_) => "PROVIDER_AUTH",
            ProviderError::RateLimit(_) => "PROVIDER_RATE_LIMIT",
            ProviderError::Transport(_) => "PROVIDER_TRANSPORT",
        }
    }
}

/// A chat-completion backend. Implementations are shared across threads;
/// each call is independent.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(
        &self,
        bundle: &PromptBundle,
        options: &CompletionOptions,
    ) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(
        &self,
        bundle: &PromptBundle,
        options: &CompletionOptions,
    ) -> Result<String, ProviderError> {
        (**self).complete(bundle, options)
    }
}
