use super::{Backend, BackendError, ChatRequest};
use serde_json::Value;
use std::path::Path;
use std::sync::Mutex;

/// Replays a fixed script of responses in order, cycling when exhausted.
/// Requests are served one at a time so the order is deterministic.
#[derive(Debug)]
pub struct MockBackend {
    script: Vec<Result<String, String>>,
    cursor: Mutex<usize>,
}

impl MockBackend {
    /// `Err` entries become transport failures.
    pub fn new(script: Vec<Result<String, String>>) -> Self {
        MockBackend {
            script,
            cursor: Mutex::new(0),
        }
    }

    /// A JSON array. Strings are replied verbatim, `{"fail": "msg"}` is a
    /// transport failure, any other value is replied as compact JSON.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| format!("mock script: {e}"))?;
        let Value::Array(items) = v else {
            return Err("mock script must be a JSON array".into());
        };
        if items.is_empty() {
            return Err("mock script is empty".into());
        }
        let script = items
            .into_iter()
            .map(|item| match item {
                Value::String(s) => Ok(s),
                Value::Object(ref m)
                    if m.len() == 1 && m.get("fail").is_some_and(Value::is_string) =>
                {
                    Err(m["fail"].as_str().unwrap().to_string())
                }
                other => Ok(other.to_string()),
            })
            .collect();
        Ok(MockBackend::new(script))
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        MockBackend::from_json(&text)
    }
}

impl Backend for MockBackend {
    fn complete(&self, _req: &ChatRequest) -> Result<String, BackendError> {
        let mut cur = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        if self.script.is_empty() {
            return Err(BackendError::Fatal("empty mock script".into()));
        }
        let item = self.script[*cur % self.script.len()].clone();
        *cur += 1;
        item.map_err(BackendError::Transport)
    }
}
