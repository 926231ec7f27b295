//! Deterministic insertion of validated hints into the original source.

use crate::plan::{split_attr, HintAtom, ValidatedPlan};
use crate::source::{SiteKind, SourcePos};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("plan position {0} does not fit the source text")]
    PositionMismatch(SourcePos),
    #[error("provenance does not match the variant text: {0}")]
    CorruptProvenance(String),
}

/// One contiguous inserted range of the variant text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertedRange {
    /// Plan indices of the items contributing to this text.
    pub items: Vec<usize>,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyNote {
    pub index: usize,
    pub atom: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedVariant {
    pub source_text: String,
    pub plan: ValidatedPlan,
    pub provenance: Vec<InsertedRange>,
    /// Items rejected because they conflict with an earlier item or with a
    /// hint already in the source.
    pub conflicts: Vec<ApplyNote>,
    /// Atoms skipped because the site already carries them.
    pub skipped: Vec<ApplyNote>,
}

impl AppliedVariant {
    /// Hint ids that made it into the text, in plan order.
    pub fn applied_hint_ids(&self) -> Vec<String> {
        let rejected: Vec<usize> = self.conflicts.iter().map(|c| c.index).collect();
        self.plan
            .items
            .iter()
            .filter(|i| !rejected.contains(&i.index))
            .flat_map(|i| i.atoms.iter().map(|a| a.hint_id.clone()))
            .collect()
    }
}

/// Attribute pairs that cannot share a declaration.
const CONFLICTS: &[(&str, &str)] = &[
    ("gcc.attr.noinline", "gcc.attr.always_inline"),
    ("gcc.attr.hot", "gcc.attr.cold"),
    ("gcc.attr.pure", "gcc.attr.const"),
    ("gcc.attr.used", "gcc.attr.unused"),
];

fn atom_name(atom: &str) -> &str {
    atom.split('(').next().unwrap_or(atom).trim()
}

fn conflicting(a: &HintAtom, b_id: &str, b_text: &str) -> bool {
    if a.hint_id == b_id {
        return a.text != b_text;
    }
    CONFLICTS
        .iter()
        .any(|(x, y)| (a.hint_id == *x && b_id == *y) || (a.hint_id == *y && b_id == *x))
}

/// Attribute atoms already written at `offset` (`__attribute__((...))`
/// groups directly following it).
fn existing_attributes(text: &str, offset: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = &text[offset..];
    loop {
        let trimmed = rest.trim_start();
        let Some(after) = trimmed
            .strip_prefix("__attribute__")
            .or_else(|| trimmed.strip_prefix("__attribute"))
        else {
            break;
        };
        let Some(open) = after.find('(') else { break };
        if !after[..open].trim().is_empty() {
            break;
        }
        let mut depth = 0;
        let mut end = None;
        for (i, c) in after.char_indices().skip(open) {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(end) = end else { break };
        let group = &trimmed[..trimmed.len() - after.len() + end + 1];
        if let Some(atoms) = split_attr(group) {
            out.extend(atoms);
        }
        rest = &after[end + 1..];
    }
    out
}

fn line_bounds(text: &str, offset: usize) -> (usize, usize) {
    let start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    (start, offset)
}

fn previous_line_is_pragma(text: &str, line_start: usize) -> bool {
    if line_start == 0 {
        return false;
    }
    let prev_start = text[..line_start - 1].rfind('\n').map_or(0, |i| i + 1);
    text[prev_start..line_start - 1]
        .trim_start()
        .starts_with("#pragma")
}

struct Pending {
    offset: usize,
    text: String,
    items: Vec<usize>,
}

/// Realizes the plan on `source_text`. Attributes for one site merge into a
/// single `__attribute__((...))` list placed before any existing attributes;
/// a pragma becomes its own line above the loop, indented like it.
pub fn apply_plan(source_text: &str, plan: &ValidatedPlan) -> Result<AppliedVariant, ApplyError> {
    for item in &plan.items {
        if SourcePos::at_offset(source_text, item.pos.byte_offset) != Some(item.pos) {
            return Err(ApplyError::PositionMismatch(item.pos));
        }
    }
    // site offset -> items in plan order
    let mut by_site: BTreeMap<usize, Vec<&crate::plan::ValidItem>> = BTreeMap::new();
    for item in &plan.items {
        by_site.entry(item.pos.byte_offset).or_default().push(item);
    }
    let mut conflicts = Vec::new();
    let mut skipped = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();

    for (&offset, items) in &by_site {
        let mut items = items.clone();
        items.sort_by_key(|i| i.index);
        if items[0].item.kind == SiteKind::Statement {
            let (line_start, _) = line_bounds(source_text, offset);
            let indent = &source_text[line_start..offset];
            let mut chosen = None;
            for item in items {
                let atom = &item.atoms[0];
                if chosen.is_some() {
                    conflicts.push(ApplyNote {
                        index: item.index,
                        atom: atom.text.clone(),
                        note: "loop already receives a pragma from an earlier item".into(),
                    });
                } else if previous_line_is_pragma(source_text, line_start) {
                    conflicts.push(ApplyNote {
                        index: item.index,
                        atom: atom.text.clone(),
                        note: "loop is already preceded by a pragma".into(),
                    });
                } else {
                    chosen = Some((item.index, atom.text.clone()));
                }
            }
            if let Some((index, text)) = chosen {
                pending.push(Pending {
                    offset: line_start,
                    text: format!("{indent}{text}\n"),
                    items: vec![index],
                });
            }
            continue;
        }

        let existing = existing_attributes(source_text, offset);
        let mut merged: Vec<(String, String)> = Vec::new(); // (hint_id, text)
        let mut contributors = Vec::new();
        for item in items {
            let clash = item.atoms.iter().find_map(|a| {
                if let Some((_, t)) = merged.iter().find(|(id, t)| conflicting(a, id, t)) {
                    return Some(format!("conflicts with `{t}` from an earlier item"));
                }
                existing
                    .iter()
                    .find(|e| {
                        let name = atom_name(e);
                        let same_hint_other_text = atom_name(&a.text) == name && a.text != **e;
                        same_hint_other_text
                            || CONFLICTS.iter().any(|(x, y)| {
                                let (xn, yn) =
                                    (x.rsplit('.').next().unwrap(), y.rsplit('.').next().unwrap());
                                let an = atom_name(&a.text);
                                (an == xn && name == yn) || (an == yn && name == xn)
                            })
                    })
                    .map(|e| format!("conflicts with existing `{e}`"))
            });
            if let Some(note) = clash {
                conflicts.push(ApplyNote {
                    index: item.index,
                    atom: item
                        .atoms
                        .iter()
                        .map(|a| a.text.as_str())
                        .collect::<Vec<_>>()
                        .join(", "),
                    note,
                });
                continue;
            }
            let mut used = false;
            for a in &item.atoms {
                if existing.contains(&a.text) {
                    skipped.push(ApplyNote {
                        index: item.index,
                        atom: a.text.clone(),
                        note: "already present in the source".into(),
                    });
                } else if merged
                    .iter()
                    .any(|(id, t)| *id == a.hint_id && *t == a.text)
                {
                    skipped.push(ApplyNote {
                        index: item.index,
                        atom: a.text.clone(),
                        note: "already added by an earlier item".into(),
                    });
                } else {
                    merged.push((a.hint_id.clone(), a.text.clone()));
                    used = true;
                }
            }
            if used {
                contributors.push(item.index);
            }
        }
        if !merged.is_empty() {
            let list: Vec<&str> = merged.iter().map(|(_, t)| t.as_str()).collect();
            pending.push(Pending {
                offset,
                text: format!("__attribute__(({})) ", list.join(", ")),
                items: contributors,
            });
        }
    }

    pending.sort_by_key(|p| p.offset);
    let mut out = source_text.to_string();
    for p in pending.iter().rev() {
        out.insert_str(p.offset, &p.text);
    }
    let mut shift = 0;
    let provenance = pending
        .into_iter()
        .map(|p| {
            let start = p.offset + shift;
            shift += p.text.len();
            InsertedRange {
                items: p.items,
                start,
                end: start + p.text.len(),
                text: p.text,
            }
        })
        .collect();
    Ok(AppliedVariant {
        source_text: out,
        plan: plan.clone(),
        provenance,
        conflicts,
        skipped,
    })
}

/// Removes every inserted range, recovering the original source.
pub fn strip_hints(variant: &AppliedVariant) -> Result<String, ApplyError> {
    let mut out = variant.source_text.clone();
    let mut ranges: Vec<&InsertedRange> = variant.provenance.iter().collect();
    ranges.sort_by_key(|r| r.start);
    for w in ranges.windows(2) {
        if w[0].end > w[1].start {
            return Err(ApplyError::CorruptProvenance(format!(
                "ranges {}..{} and {}..{} overlap",
                w[0].start, w[0].end, w[1].start, w[1].end
            )));
        }
    }
    for r in ranges.iter().rev() {
        if out.get(r.start..r.end) != Some(r.text.as_str()) {
            return Err(ApplyError::CorruptProvenance(format!(
                "bytes {}..{} are not `{}`",
                r.start,
                r.end,
                r.text.trim_end()
            )));
        }
        out.replace_range(r.start..r.end, "");
    }
    Ok(out)
}
