//! A small C/C++ tokenizer that keeps byte offsets and line/column positions.
//!
//! It recognizes just enough of the lexical grammar to walk declarations and
//! statements safely: comments, string/char literals (including raw strings),
//! preprocessor directives and balanced punctuation. Everything else is an
//! identifier, a number or a single punctuator.

use super::SourcePos;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
    /// A whole preprocessor directive, continuation lines included.
    Directive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub pos: SourcePos,
    /// True when nothing but whitespace precedes the token on its line.
    pub line_start: bool,
}

impl Token<'_> {
    pub fn end(&self) -> usize {
        self.pos.byte_offset + self.text.len()
    }

    pub fn is(&self, text: &str) -> bool {
        self.kind != TokenKind::Str && self.kind != TokenKind::Char && self.text == text
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub pos: SourcePos,
    pub message: String,
}

const PUNCT3: &[&str] = &["<<=", ">>=", "...", "->*", "<=>"];
const PUNCT2: &[&str] = &[
    "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", ".*", "##",
];

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    offset: usize,
    line: u32,
    col: u32,
    line_has_token: bool,
}

impl<'a> Cursor<'a> {
    fn pos(&self) -> SourcePos {
        SourcePos {
            line: self.line,
            col: self.col,
            byte_offset: self.offset,
        }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.offset + ahead).copied()
    }

    fn bump(&mut self) {
        if let Some(b) = self.peek(0) {
            self.offset += 1;
            if b == b'\n' {
                self.line += 1;
                self.col = 1;
                self.line_has_token = false;
            } else {
                self.col += 1;
            }
        }
    }

    fn bump_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.offset..].starts_with(s)
    }

    /// Backslash-newline splices, which may appear anywhere.
    fn at_splice(&self) -> bool {
        self.peek(0) == Some(b'\\')
            && (self.peek(1) == Some(b'\n')
                || (self.peek(1) == Some(b'\r') && self.peek(2) == Some(b'\n')))
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b'$' || b >= 0x80
}

fn is_ident_continue(b: u8) -> bool {
    is_ident_start(b) || b.is_ascii_digit()
}

/// Splits `src` into tokens. Never panics; unterminated literals and comments
/// are reported as errors.
pub fn tokenize(src: &str) -> Result<Vec<Token<'_>>, LexError> {
    let mut cur = Cursor {
        src,
        bytes: src.as_bytes(),
        offset: 0,
        line: 1,
        col: 1,
        line_has_token: false,
    };
    let mut out = Vec::new();

    while let Some(b) = cur.peek(0) {
        if cur.at_splice() {
            cur.bump_n(if cur.peek(1) == Some(b'\r') { 3 } else { 2 });
            continue;
        }
        if b.is_ascii_whitespace() {
            cur.bump();
            continue;
        }
        if cur.starts_with("//") {
            while let Some(c) = cur.peek(0) {
                if c == b'\n' {
                    break;
                }
                if cur.at_splice() {
                    cur.bump();
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            let start = cur.pos();
            cur.bump_n(2);
            loop {
                if cur.peek(0).is_none() {
                    return Err(LexError {
                        pos: start,
                        message: "unterminated block comment".into(),
                    });
                }
                if cur.starts_with("*/") {
                    cur.bump_n(2);
                    break;
                }
                cur.bump();
            }
            continue;
        }

        let start = cur.pos();
        let line_start = !cur.line_has_token;
        cur.line_has_token = true;

        let kind = if b == b'#' && line_start {
            // Directive runs to the end of the line, honoring splices and
            // skipping over comments (a block comment may span lines).
            loop {
                match cur.peek(0) {
                    None | Some(b'\n') => break,
                    _ if cur.at_splice() => {
                        cur.bump_n(if cur.peek(1) == Some(b'\r') { 3 } else { 2 });
                        cur.line_has_token = true;
                    }
                    _ if cur.starts_with("/*") => {
                        cur.bump_n(2);
                        while cur.peek(0).is_some() && !cur.starts_with("*/") {
                            cur.bump();
                        }
                        cur.bump_n(2);
                        cur.line_has_token = true;
                    }
                    _ if cur.starts_with("//") => {
                        while !matches!(cur.peek(0), None | Some(b'\n')) {
                            cur.bump();
                        }
                    }
                    _ => cur.bump(),
                }
            }
            TokenKind::Directive
        } else if let Some(prefix_len) = raw_string_prefix(&src[cur.offset..]) {
            lex_raw_string(&mut cur, prefix_len, start)?;
            TokenKind::Str
        } else if let Some(prefix_len) = quoted_prefix(&src[cur.offset..]) {
            let quote = cur.peek(prefix_len).unwrap();
            cur.bump_n(prefix_len + 1);
            loop {
                match cur.peek(0) {
                    None | Some(b'\n') => {
                        return Err(LexError {
                            pos: start,
                            message: "unterminated literal".into(),
                        })
                    }
                    Some(b'\\') => cur.bump_n(2),
                    Some(c) if c == quote => {
                        cur.bump();
                        break;
                    }
                    _ => cur.bump(),
                }
            }
            if quote == b'"' {
                TokenKind::Str
            } else {
                TokenKind::Char
            }
        } else if is_ident_start(b) {
            while cur.peek(0).is_some_and(is_ident_continue) {
                cur.bump();
            }
            TokenKind::Ident
        } else if b.is_ascii_digit()
            || (b == b'.' && cur.peek(1).is_some_and(|c| c.is_ascii_digit()))
        {
            cur.bump();
            while let Some(c) = cur.peek(0) {
                let prev = cur.bytes[cur.offset - 1];
                let exponent_sign =
                    (c == b'+' || c == b'-') && matches!(prev, b'e' | b'E' | b'p' | b'P');
                // C++14 digit separator
                let separator =
                    c == b'\'' && cur.peek(1).is_some_and(|d| d.is_ascii_alphanumeric());
                if c.is_ascii_alphanumeric() || c == b'.' || c == b'_' || exponent_sign || separator
                {
                    cur.bump();
                } else {
                    break;
                }
            }
            TokenKind::Number
        } else {
            let rest = &src[cur.offset..];
            let len = if PUNCT3.iter().any(|p| rest.starts_with(p)) {
                3
            } else if PUNCT2.iter().any(|p| rest.starts_with(p)) {
                2
            } else {
                rest.chars().next().map_or(1, char::len_utf8)
            };
            cur.bump_n(len);
            TokenKind::Punct
        };

        out.push(Token {
            kind,
            text: &src[start.byte_offset..cur.offset],
            pos: start,
            line_start,
        });
    }
    Ok(out)
}

/// Length of an encoding prefix (`u8`, `u`, `U`, `L`, or none) when the text
/// at hand opens a string or character literal.
fn quoted_prefix(rest: &str) -> Option<usize> {
    for prefix in ["u8", "u", "U", "L", ""] {
        if let Some(tail) = rest.strip_prefix(prefix) {
            if tail.starts_with('"') || tail.starts_with('\'') {
                return Some(prefix.len());
            }
        }
    }
    None
}

fn raw_string_prefix(rest: &str) -> Option<usize> {
    for prefix in ["u8R", "uR", "UR", "LR", "R"] {
        if rest.starts_with(prefix) && rest[prefix.len()..].starts_with('"') {
            return Some(prefix.len());
        }
    }
    None
}

fn lex_raw_string(
    cur: &mut Cursor<'_>,
    prefix_len: usize,
    start: SourcePos,
) -> Result<(), LexError> {
    cur.bump_n(prefix_len + 1);
    let delim_start = cur.offset;
    while let Some(c) = cur.peek(0) {
        if c == b'(' {
            break;
        }
        if c == b'\n' || c == b'"' || cur.offset - delim_start > 16 {
            return Err(LexError {
                pos: start,
                message: "malformed raw string delimiter".into(),
            });
        }
        cur.bump();
    }
    let delim = format!("){}\"", &cur.src[delim_start..cur.offset]);
    loop {
        if cur.peek(0).is_none() {
            return Err(LexError {
                pos: start,
                message: "unterminated raw string".into(),
            });
        }
        if cur.starts_with(&delim) {
            cur.bump_n(delim.len());
            return Ok(());
        }
        cur.bump();
    }
}
