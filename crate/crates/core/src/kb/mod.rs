//! The hint knowledge base: curated compiler hints with descriptions,
//! applicability prose and annotated/plain example pairs.
//!
//! Entries marked `excluded` are kept in the file for auditability but are
//! invisible through every public accessor.

mod surface;

use crate::source::SiteKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

pub use surface::{normalize_atom, SurfacePattern};

pub const KB_SCHEMA_VERSION: &str = "1";

const SEED_DOC: &str = include_str!("gcc-hints.json");

#[derive(Debug, Error)]
pub enum KbError {
    #[error("malformed hint document: {0}")]
    MalformedDoc(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("knowledge base schema version {found:?} is not supported (expected {expected:?})")]
    SchemaVersionMismatch { found: String, expected: String },
    #[error("invalid knowledge base: {0}")]
    InvalidKb(String),
    #[error("unknown hint `{0}`")]
    UnknownHint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Safety {
    SemanticsPreserving,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintEntry {
    pub hint_id: String,
    pub surface_form: String,
    pub site_kinds: Vec<SiteKind>,
    pub category: String,
    pub description: String,
    pub applicability: String,
    pub example_annotated: String,
    pub example_plain: String,
    pub safety: Safety,
    /// Static rank used when a query has no terms; higher comes first.
    #[serde(default)]
    pub priority: i64,
}

impl HintEntry {
    pub fn is_pragma(&self) -> bool {
        self.surface_form.trim_start().starts_with('#')
    }

    pub fn applies_to(&self, kind: SiteKind) -> bool {
        self.site_kinds.contains(&kind)
    }

    /// Compiled once per distinct surface form and shared.
    pub fn pattern(&self) -> Arc<SurfacePattern> {
        static CACHE: OnceLock<Mutex<HashMap<String, Arc<SurfacePattern>>>> = OnceLock::new();
        let mut cache = CACHE
            .get_or_init(Default::default)
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        cache
            .entry(self.surface_form.clone())
            .or_insert_with(|| Arc::new(SurfacePattern::new(&self.surface_form)))
            .clone()
    }
}

/// Immutable after construction; cheap to share by reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeBase {
    #[serde(default = "default_schema")]
    schema_version: String,
    version: String,
    source_doc_hash: String,
    entries: Vec<HintEntry>,
}

fn default_schema() -> String {
    KB_SCHEMA_VERSION.to_string()
}

/// Which documented hints are kept out of retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationRules {
    pub excluded_categories: BTreeSet<String>,
    pub excluded_ids: BTreeSet<String>,
    /// Exclude blocks whose document marks them `"semantics": "altering"`.
    pub exclude_altering: bool,
}

impl Default for CurationRules {
    fn default() -> Self {
        CurationRules {
            excluded_categories: [
                "Memory layout",
                "Entry control",
                "Calling convention",
                "Constructor/Destructor",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            excluded_ids: BTreeSet::new(),
            exclude_altering: true,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocFile {
    #[serde(default)]
    doc_version: Option<String>,
    hints: Vec<DocHint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocHint {
    hint_id: Option<String>,
    surface_form: Option<String>,
    site_kinds: Option<Vec<SiteKind>>,
    category: Option<String>,
    description: Option<String>,
    applicability: Option<String>,
    example_annotated: Option<String>,
    example_plain: Option<String>,
    #[serde(default)]
    priority: i64,
    #[serde(default)]
    semantics: Option<String>,
}

/// Turns a hint document into entries, tagging the ones the rules exclude.
pub fn ingest_doc(doc_text: &str, rules: &CurationRules) -> Result<Vec<HintEntry>, KbError> {
    Ok(parse_doc(doc_text, rules)?.1)
}

fn parse_doc(
    doc_text: &str,
    rules: &CurationRules,
) -> Result<(Option<String>, Vec<HintEntry>), KbError> {
    if doc_text.trim().is_empty() {
        return Ok((None, Vec::new()));
    }
    let doc: DocFile =
        serde_json::from_str(doc_text).map_err(|e| KbError::MalformedDoc(e.to_string()))?;
    let mut out = Vec::with_capacity(doc.hints.len());
    for (i, h) in doc.hints.into_iter().enumerate() {
        let field = |v: Option<String>, name: &str| {
            v.filter(|s| !s.trim().is_empty()).ok_or_else(|| {
                KbError::MalformedDoc(format!("hint #{} is missing `{name}`", i + 1))
            })
        };
        let hint_id = field(h.hint_id, "hint_id")?;
        let site_kinds = h.site_kinds.filter(|k| !k.is_empty()).ok_or_else(|| {
            KbError::MalformedDoc(format!("hint `{hint_id}` is missing `site_kinds`"))
        })?;
        let category = field(h.category, "category")?;
        let altering = match h.semantics.as_deref() {
            None | Some("preserving") => false,
            Some("altering") => true,
            Some(other) => {
                return Err(KbError::MalformedDoc(format!(
                    "hint `{hint_id}` has unknown semantics `{other}`"
                )))
            }
        };
        let excluded = rules.excluded_ids.contains(&hint_id)
            || rules.excluded_categories.contains(&category)
            || (rules.exclude_altering && altering);
        out.push(HintEntry {
            surface_form: field(h.surface_form, "surface_form")?,
            site_kinds,
            category,
            description: field(h.description, "description")?,
            applicability: field(h.applicability, "applicability")?,
            example_annotated: field(h.example_annotated, "example_annotated")?,
            example_plain: field(h.example_plain, "example_plain")?,
            safety: if excluded {
                Safety::Excluded
            } else {
                Safety::SemanticsPreserving
            },
            priority: h.priority,
            hint_id,
        });
    }
    Ok((doc.doc_version, out))
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl KnowledgeBase {
    /// Builds and validates a knowledge base.
    pub fn new(
        version: impl Into<String>,
        entries: Vec<HintEntry>,
        source_doc_hash: impl Into<String>,
    ) -> Result<Self, KbError> {
        let kb = KnowledgeBase {
            schema_version: KB_SCHEMA_VERSION.to_string(),
            version: version.into(),
            source_doc_hash: source_doc_hash.into(),
            entries,
        };
        kb.validate()?;
        Ok(kb)
    }

    /// Ingests a document into a knowledge base whose hash is the
    /// document's.
    pub fn from_doc(doc_text: &str, rules: &CurationRules) -> Result<Self, KbError> {
        let (doc_version, entries) = parse_doc(doc_text, rules)?;
        KnowledgeBase::new(
            doc_version.unwrap_or_else(|| "unversioned".to_string()),
            entries,
            content_hash(doc_text),
        )
    }

    /// The knowledge base shipped with the tool.
    pub fn seed() -> Self {
        KnowledgeBase::from_doc(SEED_DOC, &CurationRules::default())
            .expect("shipped hint document is valid")
    }

    pub fn seed_doc() -> &'static str {
        SEED_DOC
    }

    fn validate(&self) -> Result<(), KbError> {
        if self.schema_version != KB_SCHEMA_VERSION {
            return Err(KbError::SchemaVersionMismatch {
                found: self.schema_version.clone(),
                expected: KB_SCHEMA_VERSION.to_string(),
            });
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.hint_id.as_str()) {
                return Err(KbError::InvalidKb(format!(
                    "duplicate hint_id `{}`",
                    e.hint_id
                )));
            }
            if e.surface_form.trim().is_empty() || e.site_kinds.is_empty() {
                return Err(KbError::InvalidKb(format!(
                    "`{}` needs a surface form and at least one site kind",
                    e.hint_id
                )));
            }
            if e.is_pragma() && e.site_kinds.iter().any(|k| *k != SiteKind::Statement) {
                return Err(KbError::InvalidKb(format!(
                    "pragma `{}` may only target statements",
                    e.hint_id
                )));
            }
            if !e.is_pragma() && e.site_kinds.contains(&SiteKind::Statement) {
                return Err(KbError::InvalidKb(format!(
                    "attribute `{}` cannot target statements",
                    e.hint_id
                )));
            }
            if e.safety == Safety::SemanticsPreserving
                && !e.pattern().occurs_in(&e.example_annotated)
            {
                return Err(KbError::InvalidKb(format!(
                    "annotated example of `{}` does not contain its surface form",
                    e.hint_id
                )));
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn source_doc_hash(&self) -> &str {
        &self.source_doc_hash
    }

    /// Retrievable (semantics-preserving) entries, in file order.
    pub fn entries(&self) -> impl Iterator<Item = &HintEntry> {
        self.entries
            .iter()
            .filter(|e| e.safety == Safety::SemanticsPreserving)
    }

    pub fn len(&self) -> usize {
        self.entries().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of entries kept out of retrieval.
    pub fn excluded_count(&self) -> usize {
        self.entries.len() - self.len()
    }

    pub fn lookup(&self, hint_id: &str) -> Result<&HintEntry, KbError> {
        self.entries()
            .find(|e| e.hint_id == hint_id)
            .ok_or_else(|| KbError::UnknownHint(hint_id.to_string()))
    }

    /// A copy with extra retrievable entries appended.
    pub fn with_entries(&self, extra: Vec<HintEntry>) -> Result<Self, KbError> {
        let mut entries = self.entries.clone();
        entries.extend(extra);
        KnowledgeBase::new(self.version.clone(), entries, self.source_doc_hash.clone())
    }
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase, KbError> {
    let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let kb: KnowledgeBase = serde_json::from_str(&text)
        .map_err(|e| KbError::InvalidKb(format!("{}: {e}", path.display())))?;
    kb.validate()?;
    Ok(kb)
}

pub fn save_kb(kb: &KnowledgeBase, path: &Path) -> Result<(), KbError> {
    let io = |source| KbError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut text = serde_json::to_string_pretty(kb).expect("knowledge base serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_contains_documented_hints() {
        let kb = KnowledgeBase::seed();
        for id in [
            "gcc.attr.hot",
            "gcc.attr.cold",
            "gcc.attr.flatten",
            "gcc.attr.noinline",
            "gcc.attr.always_inline",
            "gcc.attr.malloc",
            "gcc.attr.pure",
            "gcc.attr.const",
            "gcc.attr.optimize",
            "gcc.attr.aligned",
            "gcc.attr.visibility_hidden",
            "gcc.attr.used",
            "gcc.attr.unused",
            "gcc.pragma.unroll",
            "omp.parallel_for",
            "omp.parallel_for_collapse",
            "omp.parallel_for_reduction",
        ] {
            kb.lookup(id).unwrap();
        }
        assert_eq!(kb.len(), 17);
        assert_eq!(kb.excluded_count(), 4);
    }

    #[test]
    fn pure_block_is_preserving_packed_is_excluded() {
        let entries = ingest_doc(SEED_DOC, &CurationRules::default()).unwrap();
        let pure = entries
            .iter()
            .find(|e| e.hint_id == "gcc.attr.pure")
            .unwrap();
        assert_eq!(pure.site_kinds, vec![SiteKind::Function]);
        assert_eq!(pure.safety, Safety::SemanticsPreserving);
        let packed = entries
            .iter()
            .find(|e| e.hint_id == "gcc.attr.packed")
            .unwrap();
        assert_eq!(packed.safety, Safety::Excluded);
        let section = entries
            .iter()
            .find(|e| e.hint_id == "gcc.attr.section")
            .unwrap();
        assert_eq!(section.safety, Safety::Excluded);
    }

    #[test]
    fn excluded_entries_are_invisible() {
        let kb = KnowledgeBase::seed();
        assert!(matches!(
            kb.lookup("gcc.attr.packed"),
            Err(KbError::UnknownHint(_))
        ));
        assert!(kb
            .entries()
            .all(|e| e.safety == Safety::SemanticsPreserving));
    }

    #[test]
    fn empty_doc_gives_no_entries() {
        assert!(ingest_doc("", &CurationRules::default())
            .unwrap()
            .is_empty());
        assert!(ingest_doc("{\"hints\": []}", &CurationRules::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn missing_field_is_malformed() {
        let doc = r#"{"hints":[{"hint_id":"x","surface_form":"__attribute__((hot))","site_kinds":["function"],"category":"c"}]}"#;
        assert!(matches!(
            ingest_doc(doc, &CurationRules::default()),
            Err(KbError::MalformedDoc(_))
        ));
    }

    #[test]
    fn ingestion_is_deterministic() {
        let a = KnowledgeBase::from_doc(SEED_DOC, &CurationRules::default()).unwrap();
        let b = KnowledgeBase::from_doc(SEED_DOC, &CurationRules::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.source_doc_hash(), content_hash(SEED_DOC));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/kb.json");
        let kb = KnowledgeBase::seed();
        save_kb(&kb, &path).unwrap();
        let back = load_kb(&path).unwrap();
        assert_eq!(back, kb);
        assert_eq!(
            back.lookup("gcc.attr.hot").unwrap(),
            kb.lookup("gcc.attr.hot").unwrap()
        );
    }

    #[test]
    fn duplicate_ids_and_bad_schema_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let kb = KnowledgeBase::seed();
        let mut json: serde_json::Value = serde_json::to_value(&kb).unwrap();
        let first = json["entries"][0].clone();
        json["entries"].as_array_mut().unwrap().push(first);
        let path = dir.path().join("dup.json");
        std::fs::write(&path, json.to_string()).unwrap();
        assert!(matches!(load_kb(&path), Err(KbError::InvalidKb(_))));

        let mut json: serde_json::Value = serde_json::to_value(&kb).unwrap();
        json["schema_version"] = "9".into();
        std::fs::write(&path, json.to_string()).unwrap();
        assert!(matches!(
            load_kb(&path),
            Err(KbError::SchemaVersionMismatch { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_kb(Path::new("/nonexistent/kb.json")),
            Err(KbError::Io { .. })
        ));
    }
}
