//! Per-candidate outcome records carried between refinement iterations.

use serde::{Deserialize, Serialize};

/// First lines of a compiler or test log kept in feedback.
pub const LOG_EXCERPT_LINES: usize = 20;
/// Upper bound on plan text echoed back to the model.
pub const PLAN_EXCERPT_CHARS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureClass {
    /// Not valid JSON or not the plan schema.
    Schema,
    /// No item survived validation (unknown hint, wrong site kind, unresolvable site).
    Site,
    Compile,
    Test,
    Timeout,
    /// Passed, but not faster than the best past the noise floor.
    Slower,
}

impl FailureClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::Schema => "schema",
            FailureClass::Site => "site",
            FailureClass::Compile => "compile",
            FailureClass::Test => "test",
            FailureClass::Timeout => "timeout",
            FailureClass::Slower => "slower",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub iteration: usize,
    /// 1-based index within the iteration's batch.
    pub candidate: usize,
    /// The plan as received (possibly truncated).
    pub plan: String,
    /// `None` when the candidate became the new best.
    pub failure_class: Option<FailureClass>,
    pub log_excerpt: String,
    /// Total measured seconds when the candidate passed.
    pub metric: Option<f64>,
}

/// Append-only list of records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeedbackHistory {
    pub records: Vec<FeedbackRecord>,
}

impl FeedbackHistory {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn count(&self, class: FailureClass) -> usize {
        self.records
            .iter()
            .filter(|r| r.failure_class == Some(class))
            .count()
    }
}

/// Appends one batch of records, normalizing their excerpts.
pub fn update_feedback(
    mut history: FeedbackHistory,
    batch: Vec<FeedbackRecord>,
) -> FeedbackHistory {
    history.records.extend(batch.into_iter().map(|mut r| {
        r.log_excerpt = log_excerpt(&r.log_excerpt);
        r.plan = truncate_chars(&r.plan, PLAN_EXCERPT_CHARS);
        r
    }));
    history
}

pub fn log_excerpt(log: &str) -> String {
    let mut lines: Vec<&str> = log.lines().take(LOG_EXCERPT_LINES).collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((cut, _)) => format!("{}...", &s[..cut]),
        None => s.to_string(),
    }
}
