use super::{Backend, BackendError, ChatRequest};
use serde_json::{json, Value};
use std::time::Duration;

/// Environment variable holding the bearer token for the chat endpoint.
pub const API_KEY_ENV: &str = "HINT_API_KEY";

/// Client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpChatBackend {
    endpoint: String,
    model: String,
    key: Option<String>,
    json_mode: bool,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("key", &self.key.as_ref().map(|_| "<redacted>"))
            .field("json_mode", &self.json_mode)
            .finish()
    }
}

impl HttpChatBackend {
    pub fn new(
        endpoint: &str,
        model: &str,
        key: Option<String>,
        json_mode: bool,
        timeout_s: f64,
    ) -> Result<Self, String> {
        if endpoint.is_empty() || model.is_empty() {
            return Err("http backend needs an endpoint and a model".into());
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(timeout_s.max(1.0)))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(HttpChatBackend {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            key,
            json_mode,
            client,
        })
    }

    pub fn request_body(&self, req: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        });
        if self.json_mode {
            body["response_format"] = json!({"type": "json_object"});
        }
        body
    }
}

impl Backend for HttpChatBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let mut rb = self
            .client
            .post(&self.endpoint)
            .json(&self.request_body(req));
        if let Some(k) = &self.key {
            rb = rb.bearer_auth(k);
        }
        let resp = rb
            .send()
            .map_err(|e| BackendError::Transport(e.without_url().to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transport(e.without_url().to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}")));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Fatal(format!("bad response JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Fatal("response has no choices[0].message.content".into()))
    }

    fn concurrent(&self) -> bool {
        true
    }
}
