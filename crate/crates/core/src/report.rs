//! Versioned report envelopes for sessions and flag comparisons.

use crate::profiler::{ProfileResult, SpeedupReport};
use crate::session::SessionOutcome;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report parse error: {0}")]
    Parse(String),
    #[error("report schema_version {found:?}, expected {expected:?}")]
    SchemaVersionMismatch { found: String, expected: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
}

impl HostInfo {
    pub fn current() -> Self {
        HostInfo {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Two flag sets profiled on the same source and suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub flags_a: Vec<String>,
    pub flags_b: Vec<String>,
    pub profile_a: ProfileResult,
    pub profile_b: ProfileResult,
    /// Ratios time(a) / time(b); above 1 means `b` is faster.
    pub speedup: SpeedupReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "lowercase")]
pub enum Payload {
    Session(Box<SessionOutcome>),
    Bench(Box<BenchTable>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema_version: String,
    pub tool_version: String,
    pub kb_version: String,
    pub compiler_id: String,
    pub host: HostInfo,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub payload: Payload,
}

impl ReportEnvelope {
    pub fn new(kb_version: &str, compiler_id: &str, payload: Payload) -> Self {
        ReportEnvelope {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            tool_version: TOOL_VERSION.into(),
            kb_version: kb_version.into(),
            compiler_id: compiler_id.into(),
            host: HostInfo::current(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))?;
        let found = v
            .get("schema_version")
            .and_then(Value::as_str)
            .unwrap_or("");
        if found != REPORT_SCHEMA_VERSION {
            return Err(ReportError::SchemaVersionMismatch {
                found: found.into(),
                expected: REPORT_SCHEMA_VERSION.into(),
            });
        }
        serde_json::from_value(v).map_err(|e| ReportError::Parse(e.to_string()))
    }
}

/// Writes the envelope as JSON, creating missing parent directories.
pub fn emit_report(envelope: &ReportEnvelope, path: &Path) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, envelope.to_json()).map_err(io)
}

pub fn read_report(path: &Path) -> Result<ReportEnvelope, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ReportEnvelope::from_json(&text)
}
