use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendReply, CompletionRequest, GatewayError, Usage};
use crate::prompt::Message;

pub const DEFAULT_CREDENTIAL_ENV: &str = "PROTO_HARNESS_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, where `attempt` counts from 1.
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << (attempt - 1).min(16));
        let capped = exp.min(self.max_delay);
        if self.jitter {
            capped.mul_f64(rand::rng().random_range(0.5..=1.0))
        } else {
            capped
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub credential_env: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            credential_env: DEFAULT_CREDENTIAL_ENV.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
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

/// Client for an OpenAI-style `chat/completions` endpoint.
pub struct HttpBackend {
    client: reqwest::Client,
    config: HttpConfig,
    api_key: String,
    id: String,
}

impl HttpBackend {
    /// Reads the credential from the configured environment variable. Fails
    /// before any network traffic if it is unset or empty.
    pub fn from_env(config: HttpConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(&config.credential_env).unwrap_or_default();
        if key.trim().is_empty() {
            return Err(GatewayError::Config(format!(
                "credential variable {} is not set",
                config.credential_env
            )));
        }
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: HttpConfig, api_key: impl Into<String>) -> Result<Self, GatewayError> {
        let api_key = api_key.into();
        if api_key.trim().is_empty() {
            return Err(GatewayError::Config("empty api key".into()));
        }
        if config.retry.max_attempts == 0 {
            return Err(GatewayError::Config("retry.max_attempts must be at least 1".into()));
        }
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        let id = format!("http:{}", config.endpoint);
        Ok(Self {
            client,
            config,
            api_key,
            id,
        })
    }

    async fn attempt(&self, request: &CompletionRequest) -> Result<BackendReply, GatewayError> {
        let body = ChatRequest {
            model: &request.params.model,
            messages: &request.messages,
            temperature: request.params.temperature,
            top_p: request.params.top_p,
            max_tokens: request.params.max_tokens,
        };
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .text()
            .await
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        if status == 429 {
            return Err(GatewayError::RateLimited { attempts: 1 });
        }
        if !(200..300).contains(&status) {
            return Err(GatewayError::Api { status, body: text });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| GatewayError::Api {
            status,
            body: format!("unparseable response ({e}): {text}"),
        })?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or(GatewayError::EmptyCompletion)?;
        Ok(BackendReply {
            text: content,
            usage: parsed.usage,
        })
    }
}

#[async_trait]
impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, GatewayError> {
        let policy = &self.config.retry;
        let mut attempt = 1;
        loop {
            match self.attempt(request).await {
                Ok(reply) => return Ok(reply),
                Err(e) if e.is_retryable() && attempt < policy.max_attempts => {
                    let wait = policy.delay(attempt);
                    log::warn!("attempt {attempt} failed ({e}); retrying in {wait:?}");
                    tokio::time::sleep(wait).await;
                    attempt += 1;
                }
                Err(GatewayError::RateLimited { .. }) => {
                    return Err(GatewayError::RateLimited { attempts: attempt })
                }
                Err(e) => return Err(e),
            }
        }
    }
}
