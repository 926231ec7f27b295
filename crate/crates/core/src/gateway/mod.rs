//! Plan generation: prompt assembly and the pluggable backends.

mod http;
mod mock;
pub mod prompt;

pub use http::{HttpChatBackend, API_KEY_ENV};
pub use mock::MockBackend;
pub use prompt::{construct_prompt, PromptBundle, Sampling, Strategy};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use thiserror::Error;

pub const DEFAULT_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// Worth retrying (connection reset, 5xx, scripted failure).
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("request budget of {0} exhausted")]
    BudgetExceeded(usize),
    #[error("sampling n must be at least 1")]
    InvalidSampling,
    #[error("backend configuration: {0}")]
    Config(String),
}

pub trait Backend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError>;

    /// Whether samples may be requested in parallel.
    fn concurrent(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    MockScripted {
        script: PathBuf,
    },
    HttpChat {
        endpoint: String,
        model: String,
        #[serde(default)]
        json_mode: bool,
        #[serde(default = "default_http_timeout")]
        timeout_s: f64,
    },
}

fn default_http_timeout() -> f64 {
    300.0
}

impl BackendConfig {
    /// Builds the backend. The http key is read from the environment here.
    pub fn build(&self) -> Result<Box<dyn Backend>, GatewayError> {
        match self {
            BackendConfig::MockScripted { script } => Ok(Box::new(
                MockBackend::from_file(script).map_err(GatewayError::Config)?,
            )),
            BackendConfig::HttpChat {
                endpoint,
                model,
                json_mode,
                timeout_s,
            } => {
                let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
                Ok(Box::new(
                    HttpChatBackend::new(endpoint, model, key, *json_mode, *timeout_s)
                        .map_err(GatewayError::Config)?,
                ))
            }
        }
    }
}

/// Request counters for one gateway. `requests` counts samples, `retries`
/// counts extra attempts.
#[derive(Debug, Default)]
pub struct Gateway {
    pub retries: usize,
    /// Cap on samples over the gateway's lifetime.
    pub max_requests: Option<usize>,
    requests: AtomicUsize,
    retry_count: AtomicUsize,
}

impl Gateway {
    pub fn new(retries: usize, max_requests: Option<usize>) -> Self {
        Gateway {
            retries,
            max_requests,
            ..Default::default()
        }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn retry_count(&self) -> usize {
        self.retry_count.load(Ordering::SeqCst)
    }

    /// Returns exactly `bundle.sampling.n` raw texts; result i is sample i.
    pub fn generate_plans(
        &self,
        bundle: &PromptBundle,
        backend: &dyn Backend,
    ) -> Result<Vec<String>, GatewayError> {
        let n = bundle.sampling.n;
        if n == 0 {
            return Err(GatewayError::InvalidSampling);
        }
        if let Some(cap) = self.max_requests {
            if self.requests() + n > cap {
                return Err(GatewayError::BudgetExceeded(cap));
            }
        }
        self.requests.fetch_add(n, Ordering::SeqCst);
        let req = ChatRequest {
            system: bundle.system.clone(),
            user: bundle.user_message(),
            temperature: bundle.sampling.temperature,
            top_p: bundle.sampling.top_p,
            max_tokens: bundle.sampling.max_tokens,
        };
        let results: Vec<Result<String, GatewayError>> = if backend.concurrent() && n > 1 {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..n)
                    .map(|_| s.spawn(|| self.sample(&req, backend)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("sample thread"))
                    .collect()
            })
        } else {
            (0..n).map(|_| self.sample(&req, backend)).collect()
        };
        results.into_iter().collect()
    }

    fn sample(&self, req: &ChatRequest, backend: &dyn Backend) -> Result<String, GatewayError> {
        let mut attempt = 0;
        loop {
            match backend.complete(req) {
                Ok(text) => return Ok(text),
                Err(BackendError::Transport(_)) if attempt < self.retries => {
                    attempt += 1;
                    self.retry_count.fetch_add(1, Ordering::SeqCst);
                }
                Err(e) => return Err(GatewayError::BackendUnavailable(e.to_string())),
            }
        }
    }
}
