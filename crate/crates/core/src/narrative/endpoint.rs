use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    /// Ask the server for a JSON-object-only reply.
    pub json_only: bool,
}

impl ChatRequest {
    pub fn deterministic(messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            temperature: 0.0,
            json_only: true,
        }
    }

    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EndpointError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("timed out")]
    Timeout,
    #[error("unexpected response body: {0}")]
    BadResponse(String),
}

/// Anything that turns a chat request into reply text.
pub trait ChatEndpoint: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError>;

    fn model(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Extra attempts after a malformed reply.
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

/// Client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpChatEndpoint {
    config: EndpointConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatEndpoint {
    pub fn new(config: EndpointConfig) -> Self {
        let token = config
            .token_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build();
        Self {
            config,
            token,
            agent,
        }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }
}

#[derive(Deserialize)]
struct CompletionReply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl ChatEndpoint for HttpChatEndpoint {
    fn complete(&self, request: &ChatRequest) -> Result<String, EndpointError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        if request.json_only {
            body["response_format"] = serde_json::json!({ "type": "json_object" });
        }
        let mut req = self.agent.post(&url);
        if let Some(token) = &self.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                return Err(EndpointError::Status {
                    status,
                    body: r.into_string().unwrap_or_default(),
                })
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") || msg.contains("Timeout") {
                    return Err(EndpointError::Timeout);
                }
                return Err(EndpointError::Transport(msg));
            }
        };
        let text = resp.into_string().map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut || e.kind() == std::io::ErrorKind::WouldBlock {
                EndpointError::Timeout
            } else {
                EndpointError::Transport(e.to_string())
            }
        })?;
        let reply: CompletionReply =
            serde_json::from_str(&text).map_err(|e| EndpointError::BadResponse(e.to_string()))?;
        reply
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| EndpointError::BadResponse("no choices".into()))
    }

    fn model(&self) -> &str {
        &self.config.model
    }
}
