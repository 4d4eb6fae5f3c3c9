use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendCall, GatewayError, TextBackend, TransportError};

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Service root; requests go to `<base_url>/chat/completions`.
    pub base_url: String,
    pub model_id: String,
    pub timeout_ms: u64,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: Option<String>,
    /// Forwarded as the request `seed` when set.
    pub seed: Option<u64>,
}

/// Chat-completions style HTTP backend.
pub struct RemoteBackend {
    config: RemoteConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
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

impl RemoteBackend {
    /// Reads the token from `auth_env` (if configured) and builds the HTTP
    /// client. A configured but unset variable is an error.
    pub fn new(config: RemoteConfig) -> Result<Self, GatewayError> {
        if config.base_url.trim().is_empty() {
            return Err(GatewayError::Config("backend.base_url is empty".into()));
        }
        let token = match &config.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| GatewayError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms.max(1)))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self { config, token, client })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

impl TextBackend for RemoteBackend {
    fn complete(&self, call: &BackendCall<'_>) -> Result<String, TransportError> {
        let mut body = json!({
            "model": self.config.model_id,
            "temperature": call.temperature,
            "messages": [
                {"role": "system", "content": call.system},
                {"role": "user", "content": call.user},
            ],
        });
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        let mut req = self.client.post(self.endpoint()).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(TransportError(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| TransportError(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError("response carried no message content".into()))
    }

    fn model_id(&self) -> &str {
        &self.config.model_id
    }
}
