//! Prompt assembly for the three prompting strategies.

use crate::feedback::{FailureClass, FeedbackRecord};
use crate::retriever::RetrievedDoc;
use crate::source::{render_markers, SourceError, StructuralAbstraction};
use serde::{Deserialize, Serialize};

pub const SYSTEM_PROMPT: &str = "You are a compiler attribute advisor.
Your goal: recommend only semantics-preserving GCC/Clang attributes
that can potentially accelerate program execution time.";

pub const TASK_INSTRUCTION: &str = "Output requirements:
- Strictly return a single valid JSON object (UTF-8),
  with no Markdown, no code fences, and no extra text.
- Do not include comments or unused / extra keys.
- Return ONLY valid JSON.

Constraints:
- Recommend only semantics-preserving edits. If safety is uncertain,
  lower confidence or skip.
- Use mainstream GCC/Clang attributes, e.g.:
  * function: hot, cold, flatten, noinline, always_inline, malloc,
    pure, const (when safe)
  * variable: aligned(...), visibility(...)

- Loops:
  * OpenMP only if no loop-carried dependencies
  * Use collapse(N) only for perfectly nested independent loops
  * Reductions only when clearly safe

- Insert attributes before variables/functions.
- Multiple hints/candidates allowed.
- JSON output only; no hidden reasoning.";

pub const COT_PREAMBLE: &str = "Deliberate privately:
- Reason step by step about safety, dependencies, aliasing,
  reductions, side effects, and OpenMP semantics.";

pub const FEWSHOT_PREAMBLE: &str = "You are a compiler attribute advisor.
Your goal: recommend only semantics-preserving GCC/Clang attributes.

Deliberate privately about safety and semantic preservation.";

pub const PLAN_SCHEMA: &str = r#"{"hints":[{"symbol":"<name>","kind":"function|global",
"line":<int>,"col":<int>,"reason":"<str>",
"candidates":[{"attr":"__attribute__((...))|#pragma",
"reason":"<str>"}]}]}"#;

const SCHEMA_NOTE: &str =
    "Use kind \"statement\" with the enclosing function name as symbol for loop pragmas.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ZeroShot,
    Cot,
    CotFewshot,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero-shot" => Ok(Strategy::ZeroShot),
            "cot" => Ok(Strategy::Cot),
            "cot-fewshot" => Ok(Strategy::CotFewshot),
            other => Err(format!(
                "unknown strategy `{other}` (zero-shot, cot, cot-fewshot)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
    pub n: usize,
    pub max_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            temperature: 1.0,
            top_p: 1.0,
            n: 5,
            max_tokens: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub strategy: Strategy,
    pub system: String,
    pub task: String,
    pub marked_code: String,
    /// Site list as JSON, shown by the few-shot template.
    pub parse_json: String,
    pub rag_context: String,
    /// Example pairs of the retrieved entries (few-shot only).
    pub examples: String,
    pub feedback: String,
    pub sampling: Sampling,
}

pub fn render_rag_context(docs: &[RetrievedDoc]) -> String {
    let mut out = String::new();
    for (i, d) in docs.iter().enumerate() {
        let e = &d.entry;
        let kinds: Vec<&str> = e.site_kinds.iter().map(|k| k.as_str()).collect();
        out.push_str(&format!(
            "[{}] {} (sites: {}; category: {})\nForm: {}\nDescription: {}\nApplicability: {}\n",
            i + 1,
            e.hint_id,
            kinds.join(", "),
            e.category,
            e.surface_form,
            e.description,
            e.applicability
        ));
        if i + 1 < docs.len() {
            out.push('\n');
        }
    }
    out
}

pub fn render_examples(docs: &[RetrievedDoc]) -> String {
    let mut out = String::new();
    for (i, d) in docs.iter().enumerate() {
        out.push_str(&format!(
            "Example {} ({}):\nWithout hint:\n{}\nWith hint:\n{}",
            i + 1,
            d.entry.hint_id,
            d.entry.example_plain.trim_end(),
            d.entry.example_annotated.trim_end()
        ));
        out.push_str(if i + 1 < docs.len() { "\n\n" } else { "\n" });
    }
    out
}

fn record_line(r: &FeedbackRecord) -> String {
    let mut tag = match r.failure_class {
        Some(c) => c.as_str().to_string(),
        None => "improved".to_string(),
    };
    if let Some(m) = r.metric {
        tag.push_str(&format!(", {m:.6}s"));
    }
    format!(
        "- iteration {} candidate {} [{}]: {}",
        r.iteration,
        r.candidate,
        tag,
        r.plan.trim()
    )
}

/// `bad hint sets` with their `bad logs`, then `good hint sets`.
pub fn render_feedback(records: &[FeedbackRecord]) -> String {
    if records.is_empty() {
        return String::new();
    }
    let (good, bad): (Vec<&FeedbackRecord>, Vec<&FeedbackRecord>) =
        records.iter().partition(|r| r.failure_class.is_none());
    let mut out = String::from("FEEDBACK FROM PREVIOUS ATTEMPTS:\n");
    if !bad.is_empty() {
        out.push_str("bad hint sets:\n");
        for r in &bad {
            out.push_str(&record_line(r));
            out.push('\n');
            if !r.log_excerpt.trim().is_empty() && r.failure_class != Some(FailureClass::Slower) {
                out.push_str("  bad logs:\n");
                for l in r.log_excerpt.lines() {
                    out.push_str("    ");
                    out.push_str(l);
                    out.push('\n');
                }
            }
        }
    }
    if !good.is_empty() {
        out.push_str("good hint sets:\n");
        for r in &good {
            out.push_str(&record_line(r));
            out.push('\n');
        }
    }
    out
}

pub fn construct_prompt(
    source: &str,
    abstraction: &StructuralAbstraction,
    docs: &[RetrievedDoc],
    feedback: &[FeedbackRecord],
    strategy: Strategy,
    sampling: Sampling,
) -> Result<PromptBundle, SourceError> {
    let marked_code = render_markers(abstraction, source)?;
    let parse_json = serde_json::to_string_pretty(&abstraction.sites()).expect("sites serialize");
    Ok(PromptBundle {
        strategy,
        system: match strategy {
            Strategy::CotFewshot => FEWSHOT_PREAMBLE
                .lines()
                .take(2)
                .collect::<Vec<_>>()
                .join("\n"),
            _ => SYSTEM_PROMPT.to_string(),
        },
        task: TASK_INSTRUCTION.to_string(),
        marked_code,
        parse_json,
        rag_context: render_rag_context(docs),
        examples: if strategy == Strategy::CotFewshot {
            render_examples(docs)
        } else {
            String::new()
        },
        feedback: render_feedback(feedback),
        sampling,
    })
}

impl PromptBundle {
    /// The user message. Byte-for-byte a function of the bundle fields.
    pub fn user_message(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        match self.strategy {
            Strategy::ZeroShot => {
                parts.push(self.task.clone());
                parts.push(format!(
                    "CODE WITH MARKERS:\n{}",
                    self.marked_code.trim_end()
                ));
            }
            Strategy::Cot => {
                parts.push(COT_PREAMBLE.to_string());
                parts.push(self.task.clone());
                parts.push(format!(
                    "CODE WITH MARKERS:\n{}",
                    self.marked_code.trim_end()
                ));
            }
            Strategy::CotFewshot => {
                let deliberate = FEWSHOT_PREAMBLE
                    .lines()
                    .skip(3)
                    .collect::<Vec<_>>()
                    .join("\n");
                parts.push(deliberate);
                parts.push(format!(
                    "Parsed attribute positions (JSON):\n{}",
                    self.parse_json
                ));
                parts.push(format!(
                    "CODE WITH MARKERS:\n{}",
                    self.marked_code.trim_end()
                ));
                if !self.examples.is_empty() {
                    parts.push(self.examples.trim_end().to_string());
                }
                parts.push(self.task.clone());
            }
        }
        if !self.rag_context.is_empty() {
            parts.push(format!("RAG_CONTEXT:\n{}", self.rag_context.trim_end()));
        }
        if !self.feedback.is_empty() {
            parts.push(self.feedback.trim_end().to_string());
        }
        let head = match self.strategy {
            Strategy::ZeroShot => "Return ONLY a JSON object:",
            Strategy::Cot => "Output ONLY JSON:",
            Strategy::CotFewshot => "Output format:",
        };
        parts.push(format!("{head}\n{PLAN_SCHEMA}\n{SCHEMA_NOTE}"));
        let mut out = parts.join("\n\n");
        out.push('\n');
        out
    }

    /// System and user message together, as persisted for audit.
    pub fn render(&self) -> String {
        format!(
            "### system\n{}\n\n### user\n{}",
            self.system,
            self.user_message()
        )
    }
}
