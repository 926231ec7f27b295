//! `hintforge.json` loading and the flag/file/default merge.

use crate::gateway::{BackendConfig, Strategy};
use crate::profiler::{CompilerConfig, NoiseFloor, DEFAULT_REPS};
use crate::session::SessionConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CONFIG_FILE_NAME: &str = "hintforge.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// One layer of settings. Every field is optional so that layers merge
/// with plain `Option::or`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub iterations: Option<usize>,
    pub candidates: Option<usize>,
    pub strategy: Option<Strategy>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
    pub k: Option<usize>,
    pub retries: Option<usize>,
    pub max_requests: Option<usize>,
    pub noise_floor_abs_s: Option<f64>,
    pub noise_floor_rel: Option<f64>,
    pub workspace: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    /// `mock` or `http`.
    pub backend: Option<String>,
    pub backend_script: Option<PathBuf>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub json_mode: Option<bool>,
    pub http_timeout_s: Option<f64>,
    pub cc: Option<String>,
    pub flags: Option<Vec<String>>,
    pub extra_flags_ofast: Option<Vec<String>>,
    pub strict_attributes: Option<bool>,
    pub ldflags: Option<Vec<String>>,
    pub reps: Option<usize>,
    /// Overrides every test case's timeout.
    pub timeout_s: Option<f64>,
}

const KEYS: &[&str] = &[
    "iterations",
    "candidates",
    "strategy",
    "temperature",
    "top_p",
    "max_tokens",
    "k",
    "retries",
    "max_requests",
    "noise_floor_abs_s",
    "noise_floor_rel",
    "workspace",
    "kb",
    "backend",
    "backend_script",
    "model",
    "endpoint",
    "json_mode",
    "http_timeout_s",
    "cc",
    "flags",
    "extra_flags_ofast",
    "strict_attributes",
    "ldflags",
    "reps",
    "timeout_s",
];

macro_rules! merge_fields {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        ConfigLayer { $($f: $hi.$f.or($lo.$f),)* }
    };
}

impl ConfigLayer {
    /// Fields of `self` win over those of `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        merge_fields!(
            self,
            lower,
            iterations,
            candidates,
            strategy,
            temperature,
            top_p,
            max_tokens,
            k,
            retries,
            max_requests,
            noise_floor_abs_s,
            noise_floor_rel,
            workspace,
            kb,
            backend,
            backend_script,
            model,
            endpoint,
            json_mode,
            http_timeout_s,
            cc,
            flags,
            extra_flags_ofast,
            strict_attributes,
            ldflags,
            reps,
            timeout_s
        )
    }

    /// Parses a config file body; unknown keys are reported by name.
    pub fn from_json(text: &str) -> Result<ConfigLayer, ConfigError> {
        if text.trim().is_empty() {
            return Ok(ConfigLayer::default());
        }
        let v: Value =
            serde_json::from_str(text).map_err(|e| ConfigError::ConfigParse(e.to_string()))?;
        let Value::Object(map) = &v else {
            return Err(ConfigError::ConfigParse(
                "config must be a JSON object".into(),
            ));
        };
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        serde_json::from_value(v).map_err(|e| ConfigError::ConfigParse(e.to_string()))
    }

    fn rebase(mut self, dir: &Path) -> ConfigLayer {
        for p in [&mut self.workspace, &mut self.kb, &mut self.backend_script]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        self
    }
}

/// The fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub session: SessionConfig,
    /// `None` when no backend was configured; `optimize` then fails.
    pub backend: Option<BackendConfig>,
    pub compiler: CompilerConfig,
    pub reps: usize,
    pub timeout_s: Option<f64>,
    /// `None` means the bundled seed KB.
    pub kb_path: Option<PathBuf>,
}

impl CliConfig {
    pub fn resolve(layer: ConfigLayer) -> Result<CliConfig, ConfigError> {
        let d = SessionConfig::default();
        let floor = NoiseFloor::default();
        let session = SessionConfig {
            iterations: layer.iterations.unwrap_or(d.iterations),
            candidates: layer.candidates.unwrap_or(d.candidates),
            strategy: layer.strategy.unwrap_or(d.strategy),
            temperature: layer.temperature.unwrap_or(d.temperature),
            top_p: layer.top_p.unwrap_or(d.top_p),
            max_tokens: layer.max_tokens.unwrap_or(d.max_tokens),
            k: layer.k.unwrap_or(d.k),
            noise_floor: NoiseFloor {
                abs_s: layer.noise_floor_abs_s.unwrap_or(floor.abs_s),
                rel: layer.noise_floor_rel.unwrap_or(floor.rel),
            },
            retries: layer.retries.unwrap_or(d.retries),
            max_requests: layer.max_requests.or(d.max_requests),
            workspace: layer.workspace.unwrap_or(d.workspace),
        };
        if session.iterations == 0 || session.candidates == 0 {
            return Err(ConfigError::Invalid(
                "iterations and candidates must be at least 1".into(),
            ));
        }
        let backend = match layer.backend.as_deref() {
            None if layer.backend_script.is_some() => Some(BackendConfig::MockScripted {
                script: layer.backend_script.unwrap(),
            }),
            None => None,
            Some("mock") => Some(BackendConfig::MockScripted {
                script: layer.backend_script.ok_or_else(|| {
                    ConfigError::Invalid("the mock backend needs backend_script".into())
                })?,
            }),
            Some("http") => Some(BackendConfig::HttpChat {
                endpoint: layer.endpoint.ok_or_else(|| {
                    ConfigError::Invalid("the http backend needs an endpoint".into())
                })?,
                model: layer
                    .model
                    .ok_or_else(|| ConfigError::Invalid("the http backend needs a model".into()))?,
                json_mode: layer.json_mode.unwrap_or(false),
                timeout_s: layer.http_timeout_s.unwrap_or(300.0),
            }),
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown backend `{other}` (mock, http)"
                )))
            }
        };
        let c = CompilerConfig::default();
        let compiler = CompilerConfig {
            cc: layer.cc.or(c.cc),
            flags: layer.flags.unwrap_or(c.flags),
            extra_flags_ofast: layer.extra_flags_ofast.unwrap_or(c.extra_flags_ofast),
            strict_attributes: layer.strict_attributes.unwrap_or(c.strict_attributes),
            ldflags: layer.ldflags.unwrap_or(c.ldflags),
        };
        let reps = layer.reps.unwrap_or(DEFAULT_REPS);
        if reps == 0 {
            return Err(ConfigError::Invalid("reps must be at least 1".into()));
        }
        if let Some(t) = layer.timeout_s {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::Invalid("timeout must be positive".into()));
            }
        }
        Ok(CliConfig {
            session,
            backend,
            compiler,
            reps,
            timeout_s: layer.timeout_s,
            kb_path: layer.kb,
        })
    }
}

/// Merges `flags` over the file at `path` (if given) over the defaults.
/// Relative paths in the file are taken relative to the file.
pub fn load_config(path: Option<&Path>, flags: ConfigLayer) -> Result<CliConfig, ConfigError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            ConfigLayer::from_json(&text)?.rebase(p.parent().unwrap_or(Path::new(".")))
        }
        None => ConfigLayer::default(),
    };
    CliConfig::resolve(flags.over(file))
}
