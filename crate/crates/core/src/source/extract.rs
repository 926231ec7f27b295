//! Declaration and loop scanner.
//!
//! Walks the token stream with a precomputed bracket-matching table, so every
//! skip over a `(...)`, `[...]` or `{...}` group is O(1). File-scope,
//! namespace, linkage-block and class-body declarations are classified into
//! function definitions/prototypes and variables; function bodies are walked
//! statement by statement to find loops.

use super::lexer::{tokenize, Token, TokenKind};
use super::{
    FunctionInfo, SourceError, SourcePos, StatementInfo, StatementKind, StructuralAbstraction,
    VarScope, VariableInfo,
};
use serde::{Deserialize, Serialize};

/// A declaration the scanner skipped because it could not classify it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unsupported {
    pub pos: SourcePos,
    pub what: String,
}

/// Strict extraction: any construct the scanner cannot classify is an error.
pub fn extract_abstraction(
    source: &str,
    file_id: &str,
) -> Result<StructuralAbstraction, SourceError> {
    let (abstraction, skipped) = extract_abstraction_lenient(source, file_id)?;
    match skipped.into_iter().next() {
        Some(u) => Err(SourceError::ParseUnsupported {
            line: u.pos.line,
            col: u.pos.col,
            what: u.what,
        }),
        None => Ok(abstraction),
    }
}

/// Extraction that skips unclassifiable declarations (yielding fewer sites)
/// and reports them alongside the abstraction. Lexical errors and unbalanced
/// brackets are still fatal.
pub fn extract_abstraction_lenient(
    source: &str,
    file_id: &str,
) -> Result<(StructuralAbstraction, Vec<Unsupported>), SourceError> {
    let toks: Vec<Token<'_>> = tokenize(source)
        .map_err(|e| SourceError::ParseUnsupported {
            line: e.pos.line,
            col: e.pos.col,
            what: e.message,
        })?
        .into_iter()
        .filter(|t| t.kind != TokenKind::Directive)
        .collect();
    let matching = match_brackets(&toks)?;
    let mut parser = Parser {
        src: source,
        toks,
        matching,
        out: StructuralAbstraction {
            file_id: file_id.to_string(),
            ..Default::default()
        },
        skipped: Vec::new(),
    };
    let end = parser.toks.len();
    parser.decl_seq(0, end, &Scope::File)?;
    parser.out.statements.sort_by_key(|s| s.pos.byte_offset);
    Ok((parser.out, parser.skipped))
}

fn match_brackets(toks: &[Token<'_>]) -> Result<Vec<usize>, SourceError> {
    let mut matching = vec![usize::MAX; toks.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text {
            "(" | "[" | "{" => stack.push(i),
            ")" | "]" | "}" => {
                let want = match t.text {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some(open) if toks[open].text == want => {
                        matching[open] = i;
                        matching[i] = open;
                    }
                    _ => {
                        return Err(SourceError::ParseUnsupported {
                            line: t.pos.line,
                            col: t.pos.col,
                            what: format!("unbalanced `{}`", t.text),
                        })
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(open) = stack.pop() {
        let t = &toks[open];
        return Err(SourceError::ParseUnsupported {
            line: t.pos.line,
            col: t.pos.col,
            what: format!("unclosed `{}`", t.text),
        });
    }
    Ok(matching)
}

enum Scope {
    File,
    Namespace,
    Linkage,
    Class { name: String, template: bool },
}

const STORAGE_WORDS: &[&str] = &[
    "static",
    "extern",
    "inline",
    "__inline",
    "__inline__",
    "virtual",
    "explicit",
    "constexpr",
    "consteval",
    "thread_local",
    "_Thread_local",
    "__thread",
    "register",
    "mutable",
    "friend",
    "_Noreturn",
];

/// Identifiers whose parenthesized argument is never a parameter list.
const GROUP_WORDS: &[&str] = &[
    "__attribute__",
    "__attribute",
    "__declspec",
    "decltype",
    "alignas",
    "_Alignas",
    "noexcept",
    "throw",
    "sizeof",
    "typeof",
    "__typeof__",
    "__typeof",
    "asm",
    "__asm__",
    "__asm",
    "_Atomic",
];

const TYPE_WORDS: &[&str] = &[
    "void",
    "char",
    "short",
    "int",
    "long",
    "float",
    "double",
    "signed",
    "unsigned",
    "bool",
    "_Bool",
    "auto",
    "const",
    "volatile",
    "restrict",
    "__restrict",
    "__restrict__",
    "typename",
    "wchar_t",
    "char8_t",
    "char16_t",
    "char32_t",
    "_Complex",
    "struct",
    "union",
    "enum",
    "class",
];

const KEYWORDS: &[&str] = &[
    "if",
    "else",
    "for",
    "while",
    "do",
    "switch",
    "case",
    "default",
    "break",
    "continue",
    "return",
    "goto",
    "sizeof",
    "new",
    "delete",
    "this",
    "true",
    "false",
    "nullptr",
    "NULL",
    "static_cast",
    "dynamic_cast",
    "reinterpret_cast",
    "const_cast",
    "operator",
    "template",
    "typedef",
    "using",
    "namespace",
    "try",
    "catch",
    "throw",
    "static",
    "extern",
    "inline",
    "register",
    "alignof",
    "_Alignof",
    "decltype",
    "noexcept",
    "constexpr",
    "typeid",
];

fn is_word(t: &Token<'_>, words: &[&str]) -> bool {
    t.kind == TokenKind::Ident && words.contains(&t.text)
}

/// Joins token texts into a readable type string (`const char *`,
/// `std::vector<int>`).
fn join_tokens<'a>(texts: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    let mut prev = "";
    for t in texts {
        let tight = out.is_empty()
            || matches!(t, "::" | "," | ">" | ">>" | "[" | "]" | ")" | "<")
            || matches!(prev, "::" | "<" | "[" | "(" | "~");
        if !tight {
            out.push(' ');
        }
        out.push_str(t);
        prev = t;
    }
    out
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token<'a>>,
    matching: Vec<usize>,
    out: StructuralAbstraction,
    skipped: Vec<Unsupported>,
}

/// What scanning a declaration head found.
#[derive(Default)]
struct Head {
    /// Token range of the declarator name, and the index of the `(` opening
    /// the parameter list.
    params: Option<(usize, usize, usize)>,
    type_kw: Option<usize>,
    saw_eq: bool,
}

impl<'a> Parser<'a> {
    fn text(&self, i: usize) -> &str {
        self.toks.get(i).map_or("", |t| t.text)
    }

    fn is_punct(&self, i: usize, p: &str) -> bool {
        self.toks
            .get(i)
            .is_some_and(|t| t.kind == TokenKind::Punct && t.text == p)
    }

    fn unsupported(&mut self, i: usize, what: impl Into<String>) {
        let pos = self.toks[i.min(self.toks.len() - 1)].pos;
        self.skipped.push(Unsupported {
            pos,
            what: what.into(),
        });
    }

    /// Index just past the `>` closing the template argument list opened at
    /// `open`. Gives up at `;` or `{`.
    fn skip_angles(&self, open: usize, end: usize) -> usize {
        let mut depth = 0i32;
        let mut k = open;
        while k < end {
            let t = &self.toks[k];
            if t.kind == TokenKind::Punct {
                match t.text {
                    "<" => depth += 1,
                    ">" => depth -= 1,
                    ">>" => depth -= 2,
                    "(" | "[" => {
                        k = self.matching[k];
                    }
                    ";" | "{" | "}" => return k,
                    _ => {}
                }
            }
            k += 1;
            if depth <= 0 {
                return k;
            }
        }
        end
    }

    /// Skips to just past the next `;` at this nesting level, hopping over a
    /// braced body if one comes first.
    fn recover(&self, mut j: usize, end: usize) -> usize {
        while j < end {
            let t = &self.toks[j];
            if t.kind == TokenKind::Punct {
                match t.text {
                    ";" => return j + 1,
                    "(" | "[" => j = self.matching[j],
                    "{" => {
                        let close = self.matching[j];
                        return if self.is_punct(close + 1, ";") {
                            close + 2
                        } else {
                            close + 1
                        };
                    }
                    _ => {}
                }
            }
            j += 1;
        }
        end
    }

    fn decl_seq(&mut self, mut i: usize, end: usize, scope: &Scope) -> Result<(), SourceError> {
        while i < end {
            i = self.declaration(i, end, scope)?;
        }
        Ok(())
    }

    /// Parses one declaration starting at `i`; returns the index after it.
    fn declaration(
        &mut self,
        mut i: usize,
        end: usize,
        scope: &Scope,
    ) -> Result<usize, SourceError> {
        let mut template = matches!(scope, Scope::Class { template: true, .. });
        // Prefixes that precede the insertion point.
        loop {
            if i >= end {
                return Ok(end);
            }
            let t = &self.toks[i];
            match t.text {
                ";" if t.kind == TokenKind::Punct => return Ok(i + 1),
                "namespace" | "inline" if t.kind == TokenKind::Ident => {
                    if t.text == "inline" && self.text(i + 1) != "namespace" {
                        break;
                    }
                    let mut j = i + 1;
                    while j < end && !matches!(self.text(j), "{" | ";" | "=") {
                        j += 1;
                    }
                    if self.is_punct(j, "{") {
                        let close = self.matching[j];
                        self.decl_seq(j + 1, close, &Scope::Namespace)?;
                        return Ok(close + 1);
                    }
                    return Ok(self.recover(j, end));
                }
                "friend" if t.kind == TokenKind::Ident => return Ok(self.recover(i, end)),
                "using" | "typedef" | "static_assert" | "_Static_assert" | "asm" | "__asm__"
                    if t.kind == TokenKind::Ident =>
                {
                    return Ok(self.skip_expression(i, end));
                }
                "template" if t.kind == TokenKind::Ident => {
                    if self.is_punct(i + 1, "<") {
                        i = self.skip_angles(i + 1, end);
                        template = true;
                    } else {
                        // explicit instantiation
                        return Ok(self.recover(i, end));
                    }
                }
                "extern"
                    if self
                        .toks
                        .get(i + 1)
                        .is_some_and(|n| n.kind == TokenKind::Str) =>
                {
                    if self.is_punct(i + 2, "{") {
                        let close = self.matching[i + 2];
                        self.decl_seq(i + 3, close, &Scope::Linkage)?;
                        return Ok(close + 1);
                    }
                    i += 2;
                }
                "public" | "private" | "protected" if self.is_punct(i + 1, ":") => i += 2,
                "__extension__" => i += 1,
                "[" if self.is_punct(i + 1, "[") => i = self.matching[i] + 1,
                _ => break,
            }
        }

        let start = i;
        let mut head = Head::default();
        let mut init_list = false;
        let mut j = start;
        while j < end {
            let t = &self.toks[j];
            if t.kind != TokenKind::Punct && t.kind != TokenKind::Ident {
                j += 1;
                continue;
            }
            match t.text {
                ";" if t.kind == TokenKind::Punct => {
                    self.simple_declaration(start, j, &head, scope, template);
                    return Ok(j + 1);
                }
                "{" if t.kind == TokenKind::Punct => {
                    let close = self.matching[j];
                    if head.saw_eq {
                        j = close + 1;
                        continue;
                    }
                    if init_list && (self.toks[j - 1].is_ident() || self.is_punct(j - 1, ">")) {
                        j = close + 1;
                        continue;
                    }
                    if head.params.is_some() {
                        self.function(start, &head, Some(j), scope, template)?;
                        return Ok(close + 1);
                    }
                    if let Some(kw) = head.type_kw {
                        if self.text(kw) != "enum" {
                            let name = self
                                .toks
                                .get(kw + 1)
                                .filter(|n| n.is_ident() && !GROUP_WORDS.contains(&n.text))
                                .map_or(String::new(), |n| n.text.to_string());
                            self.decl_seq(j + 1, close, &Scope::Class { name, template })?;
                        }
                        if self.is_punct(close + 1, ";") {
                            return Ok(close + 2);
                        }
                        if !matches!(scope, Scope::Class { .. }) {
                            self.unsupported(start, "type definition with declarators");
                        }
                        return Ok(self.recover(close + 1, end));
                    }
                    // brace-initialized variable
                    j = close + 1;
                }
                "(" if t.kind == TokenKind::Punct => {
                    let close = self.matching[j];
                    if !head.saw_eq && head.params.is_none() && j > start {
                        head.params = self.param_group(start, j);
                    }
                    j = close + 1;
                }
                "operator" if !head.saw_eq && head.params.is_none() => {
                    let name_start = self.name_start(j, start);
                    let mut k = j + 1;
                    if self.is_punct(k, "(") && self.is_punct(k + 1, ")") {
                        k += 2;
                    }
                    while k < end && !matches!(self.text(k), "(" | ";" | "{") {
                        k += 1;
                    }
                    if !self.is_punct(k, "(") {
                        j = k;
                        continue;
                    }
                    head.params = Some((name_start, k, k));
                    j = self.matching[k] + 1;
                }
                "=" if t.kind == TokenKind::Punct => {
                    head.saw_eq = true;
                    j += 1;
                }
                ":" if t.kind == TokenKind::Punct => {
                    if head.params.is_some() && !head.saw_eq {
                        init_list = true;
                    }
                    j += 1;
                }
                "<" if t.kind == TokenKind::Punct && !head.saw_eq && head.params.is_none() => {
                    j = self.skip_angles(j, end);
                }
                "[" if t.kind == TokenKind::Punct => j = self.matching[j] + 1,
                "class" | "struct" | "union" | "enum"
                    if t.kind == TokenKind::Ident && head.params.is_none() && !head.saw_eq =>
                {
                    if head.type_kw.is_none() {
                        head.type_kw = Some(j);
                    }
                    j += 1;
                }
                _ => j += 1,
            }
        }
        self.unsupported(start, "declaration runs past the end of its scope");
        Ok(end)
    }

    /// Decides whether the `(` at `open` starts a parameter list, returning
    /// the declarator name range.
    fn param_group(&self, start: usize, open: usize) -> Option<(usize, usize, usize)> {
        let prev = &self.toks[open - 1];
        if prev.is_ident() {
            if is_word(prev, GROUP_WORDS) || is_word(prev, TYPE_WORDS) || is_word(prev, KEYWORDS) {
                return None;
            }
            return Some((self.name_start(open - 1, start), open, open));
        }
        if prev.text == ">" {
            // explicit specialization such as `f<int>(...)`
            let ns = self.name_start(open - 1, start);
            if ns < open - 1 && self.toks[ns].is_ident() {
                return Some((ns, open, open));
            }
        }
        None
    }

    /// Walks back over a qualified name (`a::b<T>::~c`) ending at `k`.
    fn name_start(&self, mut k: usize, floor: usize) -> usize {
        loop {
            if self.text(k) == ">" || self.text(k) == ">>" {
                let mut depth = 0i32;
                let mut m = k;
                loop {
                    match self.text(m) {
                        ">" => depth += 1,
                        ">>" => depth += 2,
                        "<" => depth -= 1,
                        ")" | "]" => m = self.matching[m],
                        _ => {}
                    }
                    if depth <= 0 || m <= floor {
                        break;
                    }
                    m -= 1;
                }
                if m > floor {
                    k = m - 1;
                } else {
                    return k;
                }
            }
            if k > floor && self.text(k - 1) == "~" {
                k -= 1;
            }
            if k > floor && self.text(k - 1) == "::" {
                if k - 1 == floor || !(self.toks[k - 2].is_ident() || self.text(k - 2) == ">") {
                    return k - 1;
                }
                k -= 2;
                continue;
            }
            return k;
        }
    }

    fn specifier_texts(&self, from: usize, to: usize) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut k = from;
        while k < to {
            let t = &self.toks[k];
            if is_word(t, GROUP_WORDS) && self.is_punct(k + 1, "(") {
                k = self.matching[k + 1] + 1;
                continue;
            }
            if self.is_punct(k, "[") && self.is_punct(k + 1, "[") {
                k = self.matching[k] + 1;
                continue;
            }
            if !is_word(t, STORAGE_WORDS) {
                out.push(t.text);
            }
            k += 1;
        }
        out
    }

    fn has_static(&self, from: usize, to: usize) -> bool {
        self.toks[from..to]
            .iter()
            .any(|t| t.kind == TokenKind::Ident && t.text == "static")
    }

    fn qualified(&self, scope: &Scope, name: String) -> String {
        match scope {
            Scope::Class { name: cls, .. } if !cls.is_empty() && !name.contains("::") => {
                format!("{cls}::{name}")
            }
            _ => name,
        }
    }

    fn function(
        &mut self,
        start: usize,
        head: &Head,
        body: Option<usize>,
        scope: &Scope,
        template: bool,
    ) -> Result<(), SourceError> {
        let (name_start, name_end, _) = head.params.expect("function without parameter list");
        let mut name = String::new();
        for k in name_start..name_end {
            let t = self.toks[k].text;
            if !name.is_empty() && self.toks[k].is_ident() && self.toks[k - 1].is_ident() {
                name.push(' ');
            }
            name.push_str(t);
        }
        let name = self.qualified(scope, name);
        let return_type = join_tokens(self.specifier_texts(start, name_start));
        let def_pos = self.toks[start].pos;
        let body_span = match body {
            Some(open) => (self.toks[open].pos, self.toks[self.matching[open]].pos),
            None => (def_pos, def_pos),
        };
        self.out.functions.push(FunctionInfo {
            name: name.clone(),
            return_type,
            def_pos,
            body_span,
            is_definition: body.is_some(),
            is_template: template,
        });
        if let Some(open) = body {
            self.block(open, &name, 0)?;
        }
        Ok(())
    }

    fn simple_declaration(
        &mut self,
        start: usize,
        semi: usize,
        head: &Head,
        scope: &Scope,
        template: bool,
    ) {
        if start == semi {
            return;
        }
        if let Some((_, _, open)) = head.params {
            let first_arg = self.toks.get(open + 1);
            let looks_like_init = first_arg.is_some_and(|t| {
                matches!(t.kind, TokenKind::Number | TokenKind::Str | TokenKind::Char)
            });
            if !looks_like_init {
                let close = self.matching[open];
                if self.toks[close + 1..semi].iter().any(|t| t.text == ",") && !head.saw_eq {
                    self.unsupported(start, "multiple function declarators");
                    return;
                }
                let _ = self.function(start, head, None, scope, template);
                return;
            }
        }
        if matches!(scope, Scope::Class { .. }) {
            return;
        }
        if let Some(kw) = head.type_kw {
            // `struct S;` or `enum E : int;`
            let rest: Vec<&Token<'_>> = self.toks[kw + 1..semi].iter().collect();
            if rest.len() <= 1 || self.text(kw + 2) == ":" {
                return;
            }
        }
        self.variables(start, semi);
    }

    fn variables(&mut self, start: usize, semi: usize) {
        // split into declarators at top-level commas
        let mut chunks: Vec<(usize, usize)> = Vec::new();
        let mut chunk_start = start;
        let mut in_init = false;
        let mut k = start;
        while k < semi {
            match self.text(k) {
                "(" | "[" | "{" if self.toks[k].kind == TokenKind::Punct => k = self.matching[k],
                "<" if !in_init => {
                    k = self.skip_angles(k, semi);
                    continue;
                }
                "=" => in_init = true,
                "," => {
                    chunks.push((chunk_start, k));
                    chunk_start = k + 1;
                    in_init = false;
                }
                _ => {}
            }
            k += 1;
        }
        chunks.push((chunk_start, semi));

        let is_static = self.has_static(start, semi);
        let mut base: Option<String> = None;
        for (ci, &(from, to)) in chunks.iter().enumerate() {
            let Some((name_idx, decl_from)) = self.declarator_name(from, to, ci == 0) else {
                self.unsupported(from, "unnamed declarator");
                continue;
            };
            if ci == 0 {
                base = Some(join_tokens(self.specifier_texts(start, decl_from)));
            }
            let mut ty = base.clone().unwrap_or_default();
            // pointer operators before the name, array extents after it
            let mut suffix = String::new();
            for k in decl_from..to {
                if k == name_idx {
                    continue;
                }
                let t = self.text(k);
                if t == "=" || t == ":" || t == "{" {
                    break;
                }
                if k < name_idx {
                    if matches!(t, "*" | "&" | "&&" | "const" | "volatile" | "(" | ")") {
                        suffix.push_str(t);
                    }
                } else {
                    suffix.push_str(t);
                }
            }
            if !suffix.is_empty() {
                if suffix.starts_with('*') || suffix.starts_with('&') || suffix.starts_with('(') {
                    ty.push(' ');
                }
                ty.push_str(&suffix);
            }
            self.out.variables.push(VariableInfo {
                name: self.toks[name_idx].text.to_string(),
                ty,
                decl_pos: self.toks[start].pos,
                scope: if is_static {
                    VarScope::FileStatic
                } else {
                    VarScope::Global
                },
            });
        }
    }

    /// Returns (name token index, index where the declarator proper starts).
    fn declarator_name(&self, from: usize, to: usize, first: bool) -> Option<(usize, usize)> {
        let mut limit = to;
        let mut k = from;
        while k < to {
            let t = &self.toks[k];
            if t.kind == TokenKind::Punct {
                match t.text {
                    "=" | "[" | "{" | ":" => {
                        limit = k;
                        break;
                    }
                    "(" => {
                        let prev_is_group = k > from && is_word(&self.toks[k - 1], GROUP_WORDS);
                        if !prev_is_group {
                            // `(*name)(...)`: the name sits inside the group
                            let close = self.matching[k];
                            let inner = (k + 1..close).find(|&m| {
                                self.toks[m].is_ident()
                                    && !is_word(&self.toks[m], TYPE_WORDS)
                                    && !is_word(&self.toks[m], GROUP_WORDS)
                            });
                            return inner.map(|m| (m, k));
                        }
                        k = self.matching[k];
                    }
                    "<" => {
                        k = self.skip_angles(k, to);
                        continue;
                    }
                    _ => {}
                }
            }
            k += 1;
        }
        let name = (from..limit).rev().find(|&m| {
            let t = &self.toks[m];
            t.is_ident()
                && !is_word(t, TYPE_WORDS)
                && !is_word(t, STORAGE_WORDS)
                && !is_word(t, GROUP_WORDS)
                && !(m + 1 < limit && self.is_punct(m + 1, "("))
        })?;
        if first && name == from && limit - from == 1 {
            // a lone identifier is a type with no declarator
            return None;
        }
        if first
            && !(from..name).any(|m| self.toks[m].is_ident())
            && self.text(name.wrapping_sub(1)) != "::"
        {
            // `x;` with no type in the first declarator
            return None;
        }
        let mut decl_from = name;
        while decl_from > from
            && matches!(
                self.text(decl_from - 1),
                "*" | "&" | "&&" | "const" | "volatile" | "restrict" | "__restrict"
            )
        {
            if matches!(self.text(decl_from - 1), "const" | "volatile")
                && !self.is_punct(decl_from.saturating_sub(2), "*")
            {
                break;
            }
            decl_from -= 1;
        }
        Some((name, decl_from))
    }

    // ---- statements ----

    fn block(&mut self, open: usize, function: &str, depth: u32) -> Result<(), SourceError> {
        let close = self.matching[open];
        let mut k = open + 1;
        while k < close {
            k = self.statement(k, close, function, depth)?;
        }
        Ok(())
    }

    fn loop_site_ok(&self, k: usize) -> bool {
        let t = &self.toks[k];
        if !t.line_start {
            return false;
        }
        let line_begin = self.src[..t.pos.byte_offset]
            .rfind('\n')
            .map_or(0, |i| i + 1);
        self.src[line_begin..t.pos.byte_offset]
            .bytes()
            .all(|b| b == b' ' || b == b'\t')
    }

    fn record_loop(
        &mut self,
        k: usize,
        kind: StatementKind,
        function: &str,
        depth: u32,
    ) -> Option<usize> {
        if !self.loop_site_ok(k) {
            return None;
        }
        self.out.statements.push(StatementInfo {
            kind,
            pos: self.toks[k].pos,
            referenced_vars: Vec::new(),
            function: function.to_string(),
            loop_depth: depth,
        });
        Some(self.out.statements.len() - 1)
    }

    fn referenced_vars(&self, from: usize, to: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for m in from..to {
            let t = &self.toks[m];
            if !t.is_ident()
                || is_word(t, KEYWORDS)
                || is_word(t, TYPE_WORDS)
                || is_word(t, STORAGE_WORDS)
                || is_word(t, GROUP_WORDS)
            {
                continue;
            }
            if self.is_punct(m + 1, "(") || self.is_punct(m + 1, "::") {
                continue;
            }
            if m > 0 && matches!(self.text(m - 1), "." | "->" | "::") {
                continue;
            }
            if !out.iter().any(|v| v == t.text) {
                out.push(t.text.to_string());
            }
        }
        out
    }

    /// Parses one statement at `k`; returns the index after it.
    fn statement(
        &mut self,
        k: usize,
        close: usize,
        function: &str,
        depth: u32,
    ) -> Result<usize, SourceError> {
        let t = self.toks[k].clone();
        let keyword = t.kind == TokenKind::Ident;
        match t.text {
            "{" if t.kind == TokenKind::Punct => {
                self.block(k, function, depth)?;
                Ok(self.matching[k] + 1)
            }
            ";" if t.kind == TokenKind::Punct => Ok(k + 1),
            "for" | "while" if keyword && self.is_punct(k + 1, "(") => {
                let kind = if t.text == "for" {
                    StatementKind::ForLoop
                } else {
                    StatementKind::WhileLoop
                };
                let slot = self.record_loop(k, kind, function, depth);
                let body = self.matching[k + 1] + 1;
                let end = if body < close {
                    self.statement(body, close, function, depth + 1)?
                } else {
                    close
                };
                if let Some(slot) = slot {
                    self.out.statements[slot].referenced_vars = self.referenced_vars(k + 1, end);
                }
                Ok(end)
            }
            "do" if keyword => {
                let slot = self.record_loop(k, StatementKind::DoLoop, function, depth);
                let mut end = if k + 1 < close {
                    self.statement(k + 1, close, function, depth + 1)?
                } else {
                    close
                };
                if self.text(end) == "while" && self.is_punct(end + 1, "(") {
                    end = self.matching[end + 1] + 1;
                    if self.is_punct(end, ";") {
                        end += 1;
                    }
                }
                if let Some(slot) = slot {
                    self.out.statements[slot].referenced_vars = self.referenced_vars(k + 1, end);
                }
                Ok(end)
            }
            "if" | "switch" if keyword => {
                let mut c = k + 1;
                if self.text(c) == "constexpr" {
                    c += 1;
                }
                if !self.is_punct(c, "(") {
                    return Ok(self.skip_expression(k, close));
                }
                let body = self.matching[c] + 1;
                let mut end = if body < close {
                    self.statement(body, close, function, depth)?
                } else {
                    close
                };
                if t.text == "if" && end < close && self.text(end) == "else" {
                    end = if end + 1 < close {
                        self.statement(end + 1, close, function, depth)?
                    } else {
                        close
                    };
                }
                Ok(end)
            }
            "else" if keyword => Ok(k + 1),
            "try" if keyword && self.is_punct(k + 1, "{") => {
                self.block(k + 1, function, depth)?;
                let mut end = self.matching[k + 1] + 1;
                while end < close && self.text(end) == "catch" && self.is_punct(end + 1, "(") {
                    let open = self.matching[end + 1] + 1;
                    if !self.is_punct(open, "{") {
                        break;
                    }
                    self.block(open, function, depth)?;
                    end = self.matching[open] + 1;
                }
                Ok(end)
            }
            "case" if keyword => {
                let mut m = k + 1;
                while m < close && !self.is_punct(m, ":") {
                    if matches!(self.text(m), "(" | "[" | "{") {
                        m = self.matching[m];
                    }
                    m += 1;
                }
                Ok((m + 1).min(close))
            }
            "default" if keyword && self.is_punct(k + 1, ":") => Ok(k + 2),
            _ if keyword && self.is_punct(k + 1, ":") && !is_word(&t, KEYWORDS) => Ok(k + 2),
            _ => Ok(self.skip_expression(k, close)),
        }
    }

    fn skip_expression(&self, mut k: usize, close: usize) -> usize {
        while k < close {
            let t = &self.toks[k];
            if t.kind == TokenKind::Punct {
                match t.text {
                    ";" => return k + 1,
                    "(" | "[" | "{" => k = self.matching[k],
                    _ => {}
                }
            }
            k += 1;
        }
        close
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(src: &str) -> StructuralAbstraction {
        extract_abstraction(src, "t.c").unwrap()
    }

    #[test]
    fn minimal_program() {
        let a = ex("int g; int f(int x){for(;;){}}");
        assert_eq!(a.functions.len(), 1);
        assert_eq!(a.functions[0].name, "f");
        assert_eq!(a.functions[0].return_type, "int");
        assert!(a.functions[0].is_definition);
        assert_eq!(a.variables.len(), 1);
        assert_eq!(a.variables[0].name, "g");
        assert_eq!(a.variables[0].ty, "int");
        // the loop shares a line with the function header, so it is not a
        // pragma site; loops starting their own line are
        assert_eq!(a.statements.len(), 0);
        let b = ex("int g;\nint f(int x){\n  for(;;){}\n}\n");
        assert_eq!(b.statements.len(), 1);
        assert_eq!(b.statements[0].kind, StatementKind::ForLoop);
        assert_eq!(b.statements[0].function, "f");
    }

    #[test]
    fn empty_and_include_only_files() {
        assert!(ex("").is_empty());
        assert!(ex("#include <stdio.h>\n// hi\n/* there */\n#define N 10\n").is_empty());
    }

    #[test]
    fn positions_point_at_declaration_start() {
        let src = "static inline double norm(double x) { return x; }\nstatic const int N = 3, M;\n";
        let a = ex(src);
        let f = &a.functions[0];
        assert_eq!(f.return_type, "double");
        assert_eq!(
            (f.def_pos.line, f.def_pos.col, f.def_pos.byte_offset),
            (1, 1, 0)
        );
        assert_eq!(a.variables.len(), 2);
        assert_eq!(a.variables[0].scope, VarScope::FileStatic);
        assert_eq!(a.variables[0].ty, "const int");
        assert_eq!(a.variables[1].name, "M");
        assert_eq!(a.variables[1].decl_pos.line, 2);
    }

    #[test]
    fn arrays_pointers_and_function_pointers() {
        let a = ex(
            "double A[10][20];\nconst char *names[] = {\"a\", \"b\"};\nint (*handler)(int) = 0;\n",
        );
        let v: Vec<(&str, &str)> = a
            .variables
            .iter()
            .map(|v| (v.name.as_str(), v.ty.as_str()))
            .collect();
        assert_eq!(v[0], ("A", "double[10][20]"));
        assert_eq!(v[1], ("names", "const char *[]"));
        assert_eq!(v[2].0, "handler");
        assert!(a.functions.is_empty());
    }

    #[test]
    fn prototypes_and_definitions() {
        let a = ex("int f(int);\nint f(int x) { return x; }\n");
        assert_eq!(a.functions.len(), 2);
        assert!(!a.functions[0].is_definition);
        assert!(a.functions[1].is_definition);
    }

    #[test]
    fn loops_and_nesting() {
        let src = "void k(int n, double *a) {\n  int i = 0;\n  for (i = 0; i < n; i++)\n    for (int j = 0; j < n; j++)\n      a[i] += j;\n  while (i > 0) i--;\n  do {\n    i++;\n  } while (i < 3);\n}\n";
        let a = ex(src);
        let kinds: Vec<_> = a
            .statements
            .iter()
            .map(|s| (s.kind, s.loop_depth))
            .collect();
        assert_eq!(
            kinds,
            vec![
                (StatementKind::ForLoop, 0),
                (StatementKind::ForLoop, 1),
                (StatementKind::WhileLoop, 0),
                (StatementKind::DoLoop, 0),
            ]
        );
        assert_eq!(a.statements[0].referenced_vars, vec!["i", "n", "j", "a"]);
    }

    #[test]
    fn loops_in_if_switch_and_labels() {
        let src = "int f(int n) {\n  int s = 0;\n  if (n)\n    for (;;) break;\n  else\n    while (0) {}\n  switch (n) {\n  case 1:\n    for (;;) break;\n  }\nout:\n  for (;;) break;\n  if (n) for (;;) break;\n  return s;\n}\n";
        let a = ex(src);
        assert_eq!(a.statements.len(), 4);
    }

    #[test]
    fn lambdas_are_not_sites() {
        let src = "int f() {\n  auto g = [](int n) {\n    for (;;) {}\n    return n;\n  };\n  return g(1);\n}\n";
        let a = extract_abstraction(src, "t.cpp").unwrap();
        assert!(a.statements.is_empty());
        assert_eq!(a.functions.len(), 1);
    }

    #[test]
    fn cxx_classes_templates_namespaces() {
        let src = r#"#include <vector>
namespace geo {
template <typename T>
T twice(T x) { return x + x; }
struct Vec {
  double x, y;
  Vec(double a, double b) : x(a), y{b} {}
  double norm() const {
    double s = 0;
    for (int i = 0; i < 2; i++) s += i;
    return s;
  }
  bool operator<(const Vec &o) const { return x < o.x; }
  virtual ~Vec() {}
};
}
double geo::helper(int a) { return a; }
extern "C" {
int c_api(void);
}
extern "C" int c_two(int);
std::vector<int> cache;
"#;
        let a = extract_abstraction(src, "t.cpp").unwrap();
        let names: Vec<&str> = a.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "twice",
                "Vec::Vec",
                "Vec::norm",
                "Vec::operator<",
                "Vec::~Vec",
                "geo::helper",
                "c_api",
                "c_two"
            ]
        );
        assert!(a.functions[0].is_template);
        assert_eq!(a.statements.len(), 1);
        assert_eq!(a.statements[0].function, "Vec::norm");
        assert_eq!(a.variables.len(), 1);
        assert_eq!(a.variables[0].ty, "std::vector<int>");
        let c_two = &a.functions[7];
        assert_eq!(
            &src[c_two.def_pos.byte_offset..c_two.def_pos.byte_offset + 3],
            "int"
        );
    }

    #[test]
    fn struct_with_declarators_is_unsupported() {
        let src = "struct P { int x; } origin;\nint keep;\n";
        assert!(matches!(
            extract_abstraction(src, "t.c"),
            Err(SourceError::ParseUnsupported { .. })
        ));
        let (a, skipped) = extract_abstraction_lenient(src, "t.c").unwrap();
        assert_eq!(skipped.len(), 1);
        assert_eq!(a.variables.len(), 1);
        assert_eq!(a.variables[0].name, "keep");
    }

    #[test]
    fn unbalanced_source_is_an_error() {
        assert!(extract_abstraction_lenient("int f( {", "t.c").is_err());
    }

    #[test]
    fn existing_attributes_stay_after_insertion_point() {
        let src = "__attribute__((noinline)) static int f(void) { return 1; }\n[[nodiscard]] int g() { return 2; }\n";
        let a = extract_abstraction(src, "t.cpp").unwrap();
        assert_eq!(a.functions[0].def_pos.byte_offset, 0);
        assert_eq!(a.functions[0].return_type, "int");
        let g = &a.functions[1];
        assert_eq!(
            &src[g.def_pos.byte_offset..g.def_pos.byte_offset + 3],
            "int"
        );
    }

    #[test]
    fn type_definitions_and_typedefs_are_not_variables() {
        let a = ex("struct S { int a; };\ntypedef struct { int b; } T;\nenum E { A, B };\nstruct S s;\nunion U;\n");
        assert_eq!(a.variables.len(), 1);
        assert_eq!(a.variables[0].name, "s");
        assert_eq!(a.variables[0].ty, "struct S");
    }

    #[test]
    fn loop_after_comment_on_same_line_is_skipped() {
        let a = ex("void f() {\n  /* c */ for (;;) {}\n  for (;;) {}\n}\n");
        assert_eq!(a.statements.len(), 1);
        assert_eq!(a.statements[0].pos.line, 3);
    }
}
