//! Structural view of a C/C++ translation unit: functions, file-scope
//! variables and loop statements, each with the position where a hint may be
//! inserted.
//!
//! Extraction is lexer-driven and never invokes a compiler. Every emitted
//! position is a legal insertion point: immediately before the declaration
//! specifiers for functions and variables, and the start of the loop keyword
//! for statements (the pragma line goes directly above it).

mod extract;
pub mod lexer;
mod markers;
mod resolve;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub use extract::{extract_abstraction, extract_abstraction_lenient, Unsupported};
pub use markers::{render_markers, strip_markers};
pub use resolve::resolve_site;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("unsupported construct at {line}:{col}: {what}")]
    ParseUnsupported { line: u32, col: u32, what: String },
    #[error("source is not valid UTF-8 (first bad byte at offset {offset})")]
    InvalidEncoding { offset: usize },
    #[error("abstraction does not match source text: {0}")]
    PositionMismatch(String),
    #[error("no {kind} site named `{symbol}` near line {line}")]
    SiteNotFound {
        symbol: String,
        kind: SiteKind,
        line: u32,
    },
    #[error("{count} {kind} sites named `{symbol}` match line {line} equally well")]
    AmbiguousSite {
        symbol: String,
        kind: SiteKind,
        line: u32,
        count: usize,
    },
}

/// Decodes raw file bytes, rejecting anything that is not UTF-8.
pub fn decode_source(bytes: &[u8]) -> Result<&str, SourceError> {
    std::str::from_utf8(bytes).map_err(|e| SourceError::InvalidEncoding {
        offset: e.valid_up_to(),
    })
}

/// 1-based line and byte column, plus the 0-based byte offset they denote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourcePos {
    pub line: u32,
    pub col: u32,
    pub byte_offset: usize,
}

impl SourcePos {
    /// Recomputes the position of `offset` within `text`.
    pub fn at_offset(text: &str, offset: usize) -> Option<SourcePos> {
        if offset > text.len() || !text.is_char_boundary(offset) {
            return None;
        }
        let before = &text.as_bytes()[..offset];
        let line = before.iter().filter(|&&b| b == b'\n').count() as u32 + 1;
        let line_start = before
            .iter()
            .rposition(|&b| b == b'\n')
            .map_or(0, |i| i + 1);
        Some(SourcePos {
            line,
            col: (offset - line_start) as u32 + 1,
            byte_offset: offset,
        })
    }
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteKind {
    Function,
    Global,
    Statement,
}

impl SiteKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SiteKind::Function => "function",
            SiteKind::Global => "global",
            SiteKind::Statement => "statement",
        }
    }

    pub(crate) fn marker_tag(self) -> &'static str {
        match self {
            SiteKind::Function => "func",
            SiteKind::Global => "var",
            SiteKind::Statement => "stmt",
        }
    }
}

impl fmt::Display for SiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionInfo {
    /// Qualified for methods and out-of-class definitions (`Vec::norm`).
    pub name: String,
    pub return_type: String,
    pub def_pos: SourcePos,
    /// Opening and closing brace of the body; equal to `def_pos` for
    /// prototypes.
    pub body_span: (SourcePos, SourcePos),
    pub is_definition: bool,
    #[serde(default)]
    pub is_template: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarScope {
    Global,
    FileStatic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableInfo {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub decl_pos: SourcePos,
    pub scope: VarScope,
}

impl VariableInfo {
    pub fn is_array(&self) -> bool {
        self.ty.contains('[')
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    ForLoop,
    WhileLoop,
    DoLoop,
    Other,
}

impl StatementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatementKind::ForLoop => "for-loop",
            StatementKind::WhileLoop => "while-loop",
            StatementKind::DoLoop => "do-loop",
            StatementKind::Other => "other",
        }
    }

    pub fn is_loop(self) -> bool {
        self != StatementKind::Other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementInfo {
    pub kind: StatementKind,
    pub pos: SourcePos,
    pub referenced_vars: Vec<String>,
    /// Name of the function whose body holds the statement.
    pub function: String,
    /// Number of enclosing loops.
    #[serde(default)]
    pub loop_depth: u32,
}

/// The (functions, variables, statements) view of one file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructuralAbstraction {
    pub file_id: String,
    pub functions: Vec<FunctionInfo>,
    pub variables: Vec<VariableInfo>,
    pub statements: Vec<StatementInfo>,
}

/// One insertion location, flattened from the abstraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    /// 1-based, in ascending position order; the id shown in markers.
    pub id: usize,
    pub kind: SiteKind,
    pub symbol: String,
    pub pos: SourcePos,
}

impl StructuralAbstraction {
    pub fn is_empty(&self) -> bool {
        self.functions.is_empty() && self.variables.is_empty() && self.statements.is_empty()
    }

    /// All insertion locations, ordered by byte offset (ties: functions,
    /// globals, statements, then declaration order).
    pub fn sites(&self) -> Vec<Site> {
        let mut sites: Vec<(SiteKind, &str, SourcePos)> = Vec::new();
        sites.extend(
            self.functions
                .iter()
                .map(|f| (SiteKind::Function, f.name.as_str(), f.def_pos)),
        );
        sites.extend(
            self.variables
                .iter()
                .map(|v| (SiteKind::Global, v.name.as_str(), v.decl_pos)),
        );
        sites.extend(
            self.statements
                .iter()
                .map(|s| (SiteKind::Statement, s.function.as_str(), s.pos)),
        );
        // stable sort keeps declaration order among equal keys
        sites.sort_by_key(|(kind, _, pos)| (pos.byte_offset, *kind));
        sites
            .into_iter()
            .enumerate()
            .map(|(i, (kind, symbol, pos))| Site {
                id: i + 1,
                kind,
                symbol: symbol.to_string(),
                pos,
            })
            .collect()
    }

    pub fn statement_at(&self, pos: SourcePos) -> Option<&StatementInfo> {
        self.statements.iter().find(|s| s.pos == pos)
    }

    pub fn function_at(&self, pos: SourcePos) -> Option<&FunctionInfo> {
        self.functions.iter().find(|f| f.def_pos == pos)
    }
}
