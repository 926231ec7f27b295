use super::{Site, SiteKind, SourceError, SourcePos, StructuralAbstraction};

/// How far (in lines) a plan's position may drift from the real site.
pub const FUZZ_LINES: u32 = 2;

fn symbol_matches(site: &Site, kind: SiteKind, symbol: &str, stmt_keyword: Option<&str>) -> bool {
    if site.kind != kind {
        return false;
    }
    if site.symbol == symbol {
        return true;
    }
    if kind == SiteKind::Statement {
        // Loops may also be named by their keyword.
        return stmt_keyword.is_some_and(|k| k == symbol || format!("{k}-loop") == symbol);
    }
    // An unqualified method name matches its qualified form.
    site.symbol
        .rsplit_once("::")
        .is_some_and(|(_, tail)| tail == symbol)
}

/// Maps a plan's (symbol, kind, line, col) to a concrete insertion point.
pub fn resolve_site(
    abstraction: &StructuralAbstraction,
    symbol: &str,
    kind: SiteKind,
    line: u32,
    col: u32,
) -> Result<SourcePos, SourceError> {
    let keyword = |pos: SourcePos| {
        abstraction
            .statement_at(pos)
            .map(|s| match s.kind.as_str() {
                "for-loop" => "for",
                "while-loop" => "while",
                "do-loop" => "do",
                _ => "other",
            })
    };
    let sites = abstraction.sites();
    let mut exact_symbol: Vec<&Site> = sites
        .iter()
        .filter(|s| s.kind == kind && s.symbol == symbol)
        .collect();
    if exact_symbol.is_empty() {
        exact_symbol = sites
            .iter()
            .filter(|s| symbol_matches(s, kind, symbol, keyword(s.pos)))
            .collect();
    }
    let candidates = exact_symbol;

    let not_found = || SourceError::SiteNotFound {
        symbol: symbol.to_string(),
        kind,
        line,
    };
    let ambiguous = |count| SourceError::AmbiguousSite {
        symbol: symbol.to_string(),
        kind,
        line,
        count,
    };

    if let Some(s) = candidates
        .iter()
        .find(|s| s.pos.line == line && s.pos.col == col)
    {
        return Ok(s.pos);
    }
    let same_line: Vec<&&Site> = candidates.iter().filter(|s| s.pos.line == line).collect();
    if !same_line.is_empty() {
        return nearest_unique(same_line.iter().map(|s| (s.pos.col.abs_diff(col), s.pos)))
            .ok_or_else(|| ambiguous(same_line.len()));
    }
    let near: Vec<&&Site> = candidates
        .iter()
        .filter(|s| s.pos.line.abs_diff(line) <= FUZZ_LINES)
        .collect();
    if near.is_empty() {
        return Err(not_found());
    }
    nearest_unique(near.iter().map(|s| (s.pos.line.abs_diff(line), s.pos)))
        .ok_or_else(|| ambiguous(near.len()))
}

/// The position with the strictly smallest distance, if there is one.
fn nearest_unique(items: impl Iterator<Item = (u32, SourcePos)>) -> Option<SourcePos> {
    let mut items: Vec<(u32, SourcePos)> = items.collect();
    items.sort_by_key(|(d, p)| (*d, p.byte_offset));
    items.dedup_by_key(|(_, p)| p.byte_offset);
    match items.as_slice() {
        [only] => Some(only.1),
        [a, b, ..] if a.0 < b.0 => Some(a.1),
        _ => None,
    }
}
