//! Lexical (BM25) retrieval of hint entries for a program's structure.

use crate::kb::{HintEntry, KnowledgeBase};
use crate::source::StructuralAbstraction;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_K: usize = 4;
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RetrievalQuery {
    /// Sorted and de-duplicated.
    pub terms: Vec<String>,
}

impl RetrievalQuery {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = terms.into_iter().map(Into::into).collect();
        RetrievalQuery {
            terms: set.into_iter().collect(),
        }
    }

    /// The lowercase word tokens the scorer matches against.
    pub fn tokens(&self) -> BTreeSet<String> {
        self.terms.iter().flat_map(|t| tokenize(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedDoc {
    pub entry: HintEntry,
    pub score: f64,
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

const TYPE_NOISE: &[&str] = &[
    "const",
    "volatile",
    "static",
    "inline",
    "extern",
    "restrict",
    "__restrict",
    "struct",
    "union",
    "enum",
    "class",
    "typename",
    "constexpr",
];

fn base_type(ty: &str) -> Option<String> {
    let cut = ty.find('[').map_or(ty, |i| &ty[..i]);
    let words: Vec<&str> = cut
        .split(|c: char| c.is_whitespace() || c == '*' || c == '&' || c == '(' || c == ')')
        .filter(|w| !w.is_empty() && !TYPE_NOISE.contains(w))
        .collect();
    (!words.is_empty()).then(|| words.join(" "))
}

/// Splits `path_energy`, `computeNorm2` or `Vec::norm` into words.
fn name_words(name: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if !c.is_ascii_alphabetic() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_ascii_uppercase() && prev_lower && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_ascii_lowercase();
        cur.push(c.to_ascii_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words.into_iter().filter(|w| w.len() > 1).collect()
}

pub fn build_query(abstraction: &StructuralAbstraction) -> RetrievalQuery {
    let mut terms: Vec<String> = Vec::new();
    if !abstraction.functions.is_empty() {
        terms.push("function".into());
    }
    if !abstraction.variables.is_empty() {
        terms.push("global".into());
    }
    if !abstraction.statements.is_empty() {
        terms.push("statement".into());
    }
    for f in &abstraction.functions {
        terms.extend(base_type(&f.return_type));
        if f.return_type.contains('*') {
            terms.push("pointer".into());
        }
        terms.extend(name_words(&f.name));
    }
    for v in &abstraction.variables {
        terms.extend(base_type(&v.ty));
        if v.is_array() {
            terms.push("global-array".into());
        }
    }
    for s in &abstraction.statements {
        terms.push(s.kind.as_str().into());
        if s.loop_depth > 0 {
            terms.push("nested-loop".into());
        }
    }
    RetrievalQuery::new(terms)
}

/// Top-`k` retrievable entries by BM25 over description, applicability and
/// category; ties go to the smaller hint id. With no query tokens the static
/// priority ranks entries instead.
pub fn retrieve(kb: &KnowledgeBase, query: &RetrievalQuery, k: usize) -> Vec<RetrievedDoc> {
    let entries: Vec<&HintEntry> = kb.entries().collect();
    let q = query.tokens();
    let mut scored: Vec<(f64, &HintEntry)> = if q.is_empty() {
        entries
            .iter()
            .map(|e| (e.priority.max(0) as f64, *e))
            .collect()
    } else {
        let docs: Vec<BTreeMap<String, usize>> = entries
            .iter()
            .map(|e| {
                let mut tf = BTreeMap::new();
                for t in tokenize(&format!(
                    "{} {} {}",
                    e.description, e.applicability, e.category
                )) {
                    *tf.entry(t).or_insert(0) += 1;
                }
                tf
            })
            .collect();
        let lens: Vec<f64> = docs
            .iter()
            .map(|d| d.values().sum::<usize>() as f64)
            .collect();
        let n = docs.len() as f64;
        let avgdl = if docs.is_empty() {
            1.0
        } else {
            lens.iter().sum::<f64>() / n
        };
        let idf: BTreeMap<&str, f64> = q
            .iter()
            .map(|t| {
                let df = docs.iter().filter(|d| d.contains_key(t)).count() as f64;
                (t.as_str(), (1.0 + (n - df + 0.5) / (df + 0.5)).ln())
            })
            .collect();
        entries
            .iter()
            .zip(docs.iter().zip(&lens))
            .map(|(e, (tf, &dl))| {
                let mut score = 0.0;
                for t in &q {
                    let f = *tf.get(t).unwrap_or(&0) as f64;
                    if f > 0.0 {
                        score += idf[t.as_str()] * f * (BM25_K1 + 1.0)
                            / (f + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl));
                    }
                }
                (score, *e)
            })
            .collect()
    };
    scored.sort_by(|a, b| {
        if q.is_empty() {
            b.1.priority.cmp(&a.1.priority)
        } else {
            b.0.total_cmp(&a.0)
        }
        .then_with(|| a.1.hint_id.cmp(&b.1.hint_id))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(score, e)| RetrievedDoc {
            entry: e.clone(),
            score,
        })
        .collect()
}
