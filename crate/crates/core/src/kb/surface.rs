//! Surface-form templates such as `__attribute__((aligned(<n>)))` or
//! `#pragma GCC unroll <N>`, compiled to regexes over normalized text.

use regex::Regex;

const PLACEHOLDERS: &[(&str, &str)] = &[
    ("<n>", r"(\d+)"),
    ("<N>", r"(\d+)"),
    ("<args>", r#"([^"]*)"#),
    ("<op>", r"(\+|\*|-|&&|\|\||&|\||\^|min|max)"),
    ("<vars>", r"([A-Za-z_]\w*(?:,[A-Za-z_]\w*)*)"),
];

fn is_tight(c: char) -> bool {
    matches!(c, '(' | ')' | ',' | ':' | '"')
}

/// Collapses whitespace and drops it next to `( ) , : "`, leaving quoted
/// text untouched.
pub fn normalize_atom(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_quote = false;
    let mut pending_space = false;
    for c in s.trim().chars() {
        if in_quote {
            out.push(c);
            if c == '"' {
                in_quote = false;
            }
            continue;
        }
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            if out.chars().last().is_some_and(|l| !is_tight(l)) && !is_tight(c) {
                out.push(' ');
            }
            pending_space = false;
        }
        out.push(c);
        if c == '"' {
            in_quote = true;
        }
    }
    out
}

/// Inner attribute text of `__attribute__((...))`, if the form is one.
pub(crate) fn attribute_inner(form: &str) -> Option<&str> {
    form.strip_prefix("__attribute__((")?.strip_suffix("))")
}

#[derive(Debug, Clone)]
pub struct SurfacePattern {
    /// What a single plan atom must look like: the attribute's inner text or
    /// the whole pragma line.
    atom: String,
    anchored: Regex,
    anywhere: Regex,
    names: Vec<&'static str>,
}

fn template_regex(template: &str) -> (String, Vec<&'static str>) {
    let mut re = String::new();
    let mut names = Vec::new();
    let mut rest = template;
    while !rest.is_empty() {
        let next = PLACEHOLDERS
            .iter()
            .filter_map(|(p, r)| rest.find(p).map(|i| (i, *p, *r)))
            .min_by_key(|(i, _, _)| *i);
        match next {
            Some((i, p, r)) => {
                re.push_str(&regex::escape(&rest[..i]));
                re.push_str(r);
                names.push(p);
                rest = &rest[i + p.len()..];
            }
            None => {
                re.push_str(&regex::escape(rest));
                rest = "";
            }
        }
    }
    (re, names)
}

impl SurfacePattern {
    pub fn new(surface_form: &str) -> Self {
        let full = normalize_atom(surface_form);
        let atom = attribute_inner(&full).map_or(full.clone(), str::to_string);
        let (atom_re, names) = template_regex(&atom);
        let (full_re, _) = template_regex(&full);
        SurfacePattern {
            atom,
            anchored: Regex::new(&format!("^{atom_re}$")).expect("surface regex"),
            anywhere: Regex::new(&full_re).expect("surface regex"),
            names,
        }
    }

    pub fn atom(&self) -> &str {
        &self.atom
    }

    /// Matches one normalized atom; returns placeholder bindings in template
    /// order.
    pub fn matches(&self, atom: &str) -> Option<Vec<(&'static str, String)>> {
        let caps = self.anchored.captures(atom)?;
        Some(
            self.names
                .iter()
                .enumerate()
                .map(|(i, name)| (*name, caps[i + 1].to_string()))
                .collect(),
        )
    }

    /// True if the full surface form (with any parameters) appears in `text`.
    pub fn occurs_in(&self, text: &str) -> bool {
        self.anywhere.is_match(&normalize_atom(text))
    }
}
