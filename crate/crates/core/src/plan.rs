//! Strict-JSON insertion plans and their validation against a program's
//! structure and the knowledge base.

use crate::kb::{normalize_atom, HintEntry, KnowledgeBase};
use crate::source::{resolve_site, SiteKind, SourceError, SourcePos, StructuralAbstraction};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintCandidate {
    pub attr: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanItem {
    pub symbol: String,
    pub kind: SiteKind,
    pub line: u32,
    pub col: u32,
    pub reason: String,
    pub candidates: Vec<HintCandidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionPlan {
    #[serde(rename = "hints")]
    pub items: Vec<PlanItem>,
}

impl InsertionPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InvalidReason {
    #[serde(rename = "site-kind mismatch")]
    SiteKindMismatch,
    #[serde(rename = "unknown hint")]
    UnknownHint,
    #[serde(rename = "invalid parameter")]
    InvalidParameter,
    #[serde(rename = "site not found")]
    SiteNotFound,
    #[serde(rename = "ambiguous site")]
    AmbiguousSite,
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::SiteKindMismatch => "site-kind mismatch",
            InvalidReason::UnknownHint => "unknown hint",
            InvalidReason::InvalidParameter => "invalid parameter",
            InvalidReason::SiteNotFound => "site not found",
            InvalidReason::AmbiguousSite => "ambiguous site",
        }
    }

    /// Whether the item failed on its hint text rather than its location.
    pub fn is_hint_problem(self) -> bool {
        matches!(
            self,
            InvalidReason::SiteKindMismatch
                | InvalidReason::UnknownHint
                | InvalidReason::InvalidParameter
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidItem {
    /// Position of the item in the plan.
    pub index: usize,
    pub symbol: String,
    pub kind: SiteKind,
    pub line: u32,
    pub attr: String,
    pub reason: InvalidReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub invalid: Vec<InvalidItem>,
    /// Non-primary candidates dropped because they failed validation.
    #[serde(default)]
    pub dropped_alternates: usize,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.invalid.is_empty() && self.dropped_alternates == 0
    }
}

/// One normalized hint to insert: an attribute list member such as
/// `aligned(64)` or a full pragma line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintAtom {
    pub hint_id: String,
    pub text: String,
    pub is_pragma: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidItem {
    pub index: usize,
    pub item: PlanItem,
    pub pos: SourcePos,
    /// Atoms of `candidates[0]`, in written order.
    pub atoms: Vec<HintAtom>,
    /// Remaining candidates that also validated, for later retries.
    pub alternates: Vec<Vec<HintAtom>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidatedPlan {
    pub items: Vec<ValidItem>,
    pub report: ValidationReport,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("plan is not valid JSON: {0}")]
    JsonSyntaxError(String),
    #[error("plan violates the schema: {0}")]
    SchemaViolation(String),
    #[error("none of the plan's {} items is valid", .0.invalid.len())]
    AllItemsInvalid(ValidationReport),
}

/// Removes a surrounding Markdown code fence. Returns the inner text and
/// whether a fence was present.
pub fn strip_fences(text: &str) -> (&str, bool) {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map_or("", |(_, b)| b);
        let body = body.trim_end();
        let body = body.strip_suffix("```").unwrap_or(body);
        return (body.trim(), true);
    }
    (t, false)
}

pub fn parse_plan(json_text: &str) -> Result<InsertionPlan, PlanError> {
    let (body, _) = strip_fences(json_text);
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| PlanError::JsonSyntaxError(e.to_string()))?;
    let plan: InsertionPlan =
        serde_json::from_value(value).map_err(|e| PlanError::SchemaViolation(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for (i, item) in plan.items.iter().enumerate() {
        if item.line == 0 || item.col == 0 {
            return Err(PlanError::SchemaViolation(format!(
                "hints[{i}]: line and col are 1-based"
            )));
        }
        if item.candidates.is_empty() {
            return Err(PlanError::SchemaViolation(format!(
                "hints[{i}]: candidates must not be empty"
            )));
        }
        if !seen.insert((item.symbol.as_str(), item.kind, item.line)) {
            return Err(PlanError::SchemaViolation(format!(
                "hints[{i}]: second item for ({}, {}, line {})",
                item.symbol, item.kind, item.line
            )));
        }
    }
    Ok(plan)
}

/// Splits `__attribute__((a, b)) __attribute__((c))` into `a`, `b`, `c`.
/// A pragma is a single atom. `None` when the text has neither shape.
pub fn split_attr(attr: &str) -> Option<Vec<String>> {
    let t = attr.trim();
    if t.starts_with('#') {
        if t.contains('\n') {
            return None;
        }
        return Some(vec![normalize_atom(t)]);
    }
    let mut atoms = Vec::new();
    let mut rest = t;
    while !rest.is_empty() {
        let after = rest
            .strip_prefix("__attribute__")
            .or_else(|| rest.strip_prefix("__attribute"))?
            .trim_start();
        let inner_start = after.strip_prefix('(')?.trim_start().strip_prefix('(')?;
        // find the `))` closing this group
        let mut depth = 2i32;
        let mut in_quote = false;
        let mut end = None;
        for (i, c) in inner_start.char_indices() {
            match c {
                '"' => in_quote = !in_quote,
                '(' if !in_quote => depth += 1,
                ')' if !in_quote => {
                    depth -= 1;
                    if depth == 1 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end?;
        let inner = &inner_start[..end];
        let after_inner = inner_start[end + 1..].trim_start().strip_prefix(')')?;
        for part in split_top_level(inner) {
            let a = normalize_atom(part);
            if a.is_empty() {
                return None;
            }
            atoms.push(strip_underscores(&a));
        }
        rest = after_inner.trim_start();
    }
    (!atoms.is_empty()).then_some(atoms)
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut in_quote = false;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '(' if !in_quote => depth += 1,
            ')' if !in_quote => depth -= 1,
            ',' if !in_quote && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// `__hot__` and `__aligned__(8)` are spellings of `hot` and `aligned(8)`.
fn strip_underscores(atom: &str) -> String {
    let name_end = atom.find('(').unwrap_or(atom.len());
    let name = &atom[..name_end];
    match name.strip_prefix("__").and_then(|n| n.strip_suffix("__")) {
        Some(bare) if !bare.is_empty() => format!("{bare}{}", &atom[name_end..]),
        _ => atom.to_string(),
    }
}

const DENIED_OPTIMIZE: &[&str] = &[
    "ofast",
    "fast-math",
    "unsafe-math-optimizations",
    "associative-math",
    "reciprocal-math",
    "finite-math-only",
    "no-signed-zeros",
    "no-trapping-math",
    "no-math-errno",
    "cx-limited-range",
];

fn check_params(entry: &HintEntry, bindings: &[(&'static str, String)]) -> Result<(), String> {
    for (name, value) in bindings {
        match (entry.hint_id.as_str(), *name) {
            (_, "<n>") if entry.surface_form.contains("aligned") => {
                let n: u64 = value
                    .parse()
                    .map_err(|_| format!("alignment `{value}` is not a number"))?;
                if n == 0 || !n.is_power_of_two() || n > 4096 {
                    return Err(format!(
                        "alignment {n} must be a power of two no larger than 4096"
                    ));
                }
            }
            (_, "<N>") if entry.surface_form.contains("unroll") => {
                let n: u64 = value
                    .parse()
                    .map_err(|_| format!("unroll factor `{value}` is not a number"))?;
                if !(2..=64).contains(&n) {
                    return Err(format!("unroll factor {n} must be between 2 and 64"));
                }
            }
            (_, "<N>") if entry.surface_form.contains("collapse") => {
                let n: u64 = value
                    .parse()
                    .map_err(|_| format!("collapse depth `{value}` is not a number"))?;
                if !(1..=8).contains(&n) {
                    return Err(format!("collapse depth {n} must be between 1 and 8"));
                }
            }
            (_, "<args>") if entry.surface_form.contains("optimize") => {
                for opt in value.split(',').map(str::trim) {
                    let valid = !opt.is_empty()
                        && opt.chars().all(|c| {
                            c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '=' | '.')
                        });
                    if !valid {
                        return Err(format!("optimize option `{opt}` is malformed"));
                    }
                    let lower = opt.trim_start_matches('-').to_ascii_lowercase();
                    let bare = lower.strip_prefix('f').unwrap_or(&lower);
                    if DENIED_OPTIMIZE.iter().any(|d| lower == *d || bare == *d) {
                        return Err(format!(
                            "optimize option `{opt}` may change program semantics"
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Matches every atom of one candidate against the knowledge base.
pub fn resolve_candidate(
    attr: &str,
    kind: SiteKind,
    kb: &KnowledgeBase,
) -> Result<Vec<HintAtom>, (InvalidReason, String)> {
    let atoms = split_attr(attr).ok_or_else(|| {
        (
            InvalidReason::UnknownHint,
            format!("`{attr}` is neither an __attribute__ list nor a pragma"),
        )
    })?;
    let mut out = Vec::with_capacity(atoms.len());
    for atom in atoms {
        let mut matched: Vec<(&HintEntry, Vec<(&'static str, String)>)> = Vec::new();
        for e in kb.entries() {
            if let Some(b) = e.pattern().matches(&atom) {
                matched.push((e, b));
            }
        }
        if matched.is_empty() {
            return Err((
                InvalidReason::UnknownHint,
                format!("`{atom}` is not in the knowledge base"),
            ));
        }
        let Some((entry, bindings)) = matched.iter().find(|(e, _)| e.applies_to(kind)) else {
            let kinds: Vec<&str> = matched[0].0.site_kinds.iter().map(|k| k.as_str()).collect();
            return Err((
                InvalidReason::SiteKindMismatch,
                format!("`{atom}` applies to {} sites, not {kind}", kinds.join("/")),
            ));
        };
        check_params(entry, bindings).map_err(|d| (InvalidReason::InvalidParameter, d))?;
        out.push(HintAtom {
            hint_id: entry.hint_id.clone(),
            is_pragma: entry.is_pragma(),
            text: atom,
        });
    }
    if out.iter().filter(|a| a.is_pragma).count() > 1 {
        return Err((
            InvalidReason::UnknownHint,
            "one candidate may carry at most one pragma".into(),
        ));
    }
    Ok(out)
}

pub fn validate_plan(
    plan: &InsertionPlan,
    abstraction: &StructuralAbstraction,
    kb: &KnowledgeBase,
) -> Result<ValidatedPlan, PlanError> {
    let mut out = ValidatedPlan::default();
    for (index, item) in plan.items.iter().enumerate() {
        let attr = item
            .candidates
            .first()
            .map_or(String::new(), |c| c.attr.clone());
        let invalid = |reason, detail| InvalidItem {
            index,
            symbol: item.symbol.clone(),
            kind: item.kind,
            line: item.line,
            attr: attr.clone(),
            reason,
            detail,
        };
        let atoms = match resolve_candidate(&attr, item.kind, kb) {
            Ok(a) => a,
            Err((reason, detail)) => {
                out.report.invalid.push(invalid(reason, detail));
                continue;
            }
        };
        let pos = match resolve_site(abstraction, &item.symbol, item.kind, item.line, item.col) {
            Ok(p) => p,
            Err(e) => {
                let reason = match e {
                    SourceError::AmbiguousSite { .. } => InvalidReason::AmbiguousSite,
                    _ => InvalidReason::SiteNotFound,
                };
                out.report.invalid.push(invalid(reason, e.to_string()));
                continue;
            }
        };
        let mut alternates = Vec::new();
        for c in item.candidates.iter().skip(1) {
            match resolve_candidate(&c.attr, item.kind, kb) {
                Ok(a) => alternates.push(a),
                Err(_) => out.report.dropped_alternates += 1,
            }
        }
        out.items.push(ValidItem {
            index,
            item: item.clone(),
            pos,
            atoms,
            alternates,
        });
    }
    if out.items.is_empty() && !plan.items.is_empty() {
        return Err(PlanError::AllItemsInvalid(out.report));
    }
    Ok(out)
}
