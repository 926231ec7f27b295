use super::{SourceError, SourcePos, StructuralAbstraction};
use regex::Regex;
use std::sync::OnceLock;

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"/\*<(?:func|var|stmt) id=\d+ line=\d+ col=\d+>\*/").unwrap())
}

/// Inserts a comment marker at every insertion point. Markers sharing an
/// offset (several declarators of one declaration) appear in site order.
pub fn render_markers(
    abstraction: &StructuralAbstraction,
    source: &str,
) -> Result<String, SourceError> {
    let sites = abstraction.sites();
    for site in &sites {
        check_pos(source, site.pos)?;
    }
    let mut out = String::with_capacity(source.len() + sites.len() * 32);
    let mut cursor = 0;
    for site in &sites {
        out.push_str(&source[cursor..site.pos.byte_offset]);
        cursor = site.pos.byte_offset;
        out.push_str(&format!(
            "/*<{} id={} line={} col={}>*/",
            site.kind.marker_tag(),
            site.id,
            site.pos.line,
            site.pos.col
        ));
    }
    out.push_str(&source[cursor..]);
    Ok(out)
}

/// Removes every marker produced by [`render_markers`].
pub fn strip_markers(marked: &str) -> String {
    marker_re().replace_all(marked, "").into_owned()
}

fn check_pos(source: &str, pos: SourcePos) -> Result<(), SourceError> {
    match SourcePos::at_offset(source, pos.byte_offset) {
        Some(actual) if actual == pos => Ok(()),
        Some(actual) => Err(SourceError::PositionMismatch(format!(
            "offset {} is at {actual}, abstraction says {pos}",
            pos.byte_offset
        ))),
        None => Err(SourceError::PositionMismatch(format!(
            "offset {} is outside the {}-byte text",
            pos.byte_offset,
            source.len()
        ))),
    }
}
