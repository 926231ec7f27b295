use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_TIMEOUT_S: f64 = 10.0;
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid test suite: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Comparison {
    ByteExact,
    FloatTolerant { eps: f64 },
}

impl Comparison {
    /// Byte equality, or token-wise equality where numeric tokens may differ
    /// by a relative `eps` (with `eps` also serving as an absolute floor
    /// near zero).
    pub fn matches(&self, expected: &[u8], actual: &[u8]) -> bool {
        match *self {
            Comparison::ByteExact => expected == actual,
            Comparison::FloatTolerant { eps } => {
                let (Ok(e), Ok(a)) = (std::str::from_utf8(expected), std::str::from_utf8(actual))
                else {
                    return expected == actual;
                };
                let mut et = e.split_whitespace();
                let mut at = a.split_whitespace();
                loop {
                    match (et.next(), at.next()) {
                        (None, None) => return true,
                        (Some(x), Some(y)) => {
                            if x == y {
                                continue;
                            }
                            match (x.parse::<f64>(), y.parse::<f64>()) {
                                (Ok(p), Ok(q)) if p.is_finite() && q.is_finite() => {
                                    let diff = (p - q).abs();
                                    if diff > eps * p.abs().max(q.abs()) && diff > eps {
                                        return false;
                                    }
                                }
                                _ => return false,
                            }
                        }
                        _ => return false,
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub args: Vec<String>,
    pub stdin: Vec<u8>,
    pub expected_stdout: Vec<u8>,
    pub timeout_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub comparison: Comparison,
    pub cases: Vec<TestCase>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default)]
    comparison: Option<String>,
    #[serde(default)]
    eps: Option<f64>,
    cases: Vec<CaseFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    args: Vec<String>,
    #[serde(default)]
    stdin: Option<String>,
    expected_stdout: String,
    #[serde(default)]
    timeout_s: Option<f64>,
}

impl TestSuite {
    pub fn new(comparison: Comparison, cases: Vec<TestCase>) -> Result<Self, SuiteError> {
        let suite = TestSuite { comparison, cases };
        suite.validate()?;
        Ok(suite)
    }

    fn validate(&self) -> Result<(), SuiteError> {
        if self.cases.is_empty() {
            return Err(SuiteError::Invalid(
                "a suite needs at least one case".into(),
            ));
        }
        for c in &self.cases {
            if !(c.timeout_s > 0.0 && c.timeout_s.is_finite()) {
                return Err(SuiteError::Invalid(format!(
                    "case {} has a non-positive timeout",
                    c.id
                )));
            }
        }
        let mut ids: Vec<&str> = self.cases.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SuiteError::Invalid("case names must be unique".into()));
        }
        if let Comparison::FloatTolerant { eps } = self.comparison {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(SuiteError::Invalid(
                    "eps must be a non-negative number".into(),
                ));
            }
        }
        Ok(())
    }

    /// Parses suite JSON. `stdin` and `expected_stdout` values starting with
    /// `@` name files relative to `base_dir`; anything else is inline text.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, SuiteError> {
        let raw: SuiteFile =
            serde_json::from_str(text).map_err(|e| SuiteError::Invalid(e.to_string()))?;
        let comparison = match raw.comparison.as_deref() {
            None | Some("byte-exact") => Comparison::ByteExact,
            Some("float-tolerant") => Comparison::FloatTolerant {
                eps: raw.eps.unwrap_or(DEFAULT_EPS),
            },
            Some(other) => {
                return Err(SuiteError::Invalid(format!("unknown comparison `{other}`")))
            }
        };
        let load = |v: &str| -> Result<Vec<u8>, SuiteError> {
            match v.strip_prefix('@') {
                Some(rel) => {
                    let path = base_dir.join(rel);
                    std::fs::read(&path).map_err(|source| SuiteError::Io { path, source })
                }
                None => Ok(v.as_bytes().to_vec()),
            }
        };
        let mut cases = Vec::with_capacity(raw.cases.len());
        for (i, c) in raw.cases.into_iter().enumerate() {
            cases.push(TestCase {
                id: c.name.unwrap_or_else(|| format!("case-{}", i + 1)),
                args: c.args,
                stdin: c
                    .stdin
                    .as_deref()
                    .map(load)
                    .transpose()?
                    .unwrap_or_default(),
                expected_stdout: load(&c.expected_stdout)?,
                timeout_s: c.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S),
            });
        }
        TestSuite::new(comparison, cases)
    }

    pub fn load(path: &Path) -> Result<Self, SuiteError> {
        let text = std::fs::read_to_string(path).map_err(|source| SuiteError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        TestSuite::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
