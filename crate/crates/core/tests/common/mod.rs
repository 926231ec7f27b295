#![allow(dead_code)]

use hintforge::kb::{HintEntry, KnowledgeBase};
use hintforge::plan::{HintCandidate, InsertionPlan, PlanItem};
use hintforge::profiler::{
    Build, CaseResult, Comparison, Language, ProfileError, ProfileResult, Profiler, TestCase,
    TestSuite, Verdict,
};
use hintforge::source::{extract_abstraction, Site, SiteKind, StructuralAbstraction};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

pub struct CorpusFile {
    pub name: String,
    pub path: PathBuf,
    pub lang: Language,
    pub source: String,
    pub input: Vec<u8>,
    /// (hint name, symbol) pairs whose preconditions the function does not
    /// meet, from the `// unsafe:` line.
    pub unsafe_pairs: BTreeSet<(String, String)>,
    pub abstraction: StructuralAbstraction,
}

impl CorpusFile {
    pub fn is_unsafe(&self, entry: &HintEntry, symbol: &str) -> bool {
        let name = entry.hint_id.rsplit('.').next().unwrap_or("");
        self.unsafe_pairs
            .contains(&(name.to_string(), symbol.to_string()))
    }
}

pub fn corpus() -> Vec<CorpusFile> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("c" | "cpp")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let source = std::fs::read_to_string(&path).unwrap();
            let input = std::fs::read(path.with_extension("in")).unwrap_or_default();
            let unsafe_pairs = source
                .lines()
                .filter_map(|l| l.strip_prefix("// unsafe:"))
                .flat_map(|l| l.split_whitespace())
                .map(|t| {
                    let (h, s) = t.split_once('@').expect("hint@symbol");
                    (h.to_string(), s.to_string())
                })
                .collect();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let abstraction = extract_abstraction(&source, &name).unwrap();
            CorpusFile {
                lang: Language::from_path(&path),
                name,
                path,
                source,
                input,
                unsafe_pairs,
                abstraction,
            }
        })
        .collect()
}

/// A concrete attribute text for `entry` with every placeholder filled.
/// `pick` chooses among a few legal values.
pub fn instantiate(entry: &HintEntry, vars: &[String], pick: usize) -> String {
    let form = &entry.surface_form;
    let var = vars.first().cloned().unwrap_or_else(|| "i".to_string());
    form.replace("<n>", ["64", "16", "32", "128"][pick % 4])
        .replace(
            "<N>",
            if form.contains("collapse") {
                "1"
            } else {
                ["4", "2", "8", "16"][pick % 4]
            },
        )
        .replace(
            "<args>",
            ["unroll-loops", "O2", "O3", "no-tree-vectorize"][pick % 4],
        )
        .replace("<op>", ["+", "max", "*", "min"][pick % 4])
        .replace("<vars>", &var)
}

pub fn applicable(kb: &KnowledgeBase, kind: SiteKind) -> Vec<&HintEntry> {
    kb.entries().filter(|e| e.applies_to(kind)).collect()
}

pub fn statement_vars(abs: &StructuralAbstraction, site: &Site) -> Vec<String> {
    abs.statement_at(site.pos)
        .map(|s| s.referenced_vars.clone())
        .unwrap_or_default()
}

pub fn item(site: &Site, attrs: &[String]) -> PlanItem {
    PlanItem {
        symbol: site.symbol.clone(),
        kind: site.kind,
        line: site.pos.line,
        col: site.pos.col,
        reason: "test".into(),
        candidates: attrs
            .iter()
            .map(|a| HintCandidate {
                attr: a.clone(),
                reason: "test".into(),
            })
            .collect(),
    }
}

/// A plan naming a random subset of sites, each with one to three
/// candidates built from applicable entries. Every first candidate is valid.
pub fn random_plan<R: Rng>(
    rng: &mut R,
    abs: &StructuralAbstraction,
    kb: &KnowledgeBase,
) -> InsertionPlan {
    let sites = abs.sites();
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for site in &sites {
        if !rng.gen_bool(0.6) || !seen.insert((site.symbol.clone(), site.kind, site.pos.line)) {
            continue;
        }
        let pool = applicable(kb, site.kind);
        let vars = statement_vars(abs, site);
        let mut attrs = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let e = pool.choose(rng).unwrap();
            let text = instantiate(e, &vars, rng.gen_range(0..4));
            // Sometimes pack two attributes into one list.
            if !e.is_pragma() && rng.gen_bool(0.3) {
                let other = pool.iter().filter(|o| !o.is_pragma()).collect::<Vec<_>>();
                let o = other.choose(rng).unwrap();
                let inner = |t: &str| {
                    t.trim_start_matches("__attribute__((")
                        .trim_end_matches("))")
                        .to_string()
                };
                let second = instantiate(o, &vars, rng.gen_range(0..4));
                attrs.push(format!(
                    "__attribute__(({}, {}))",
                    inner(&text),
                    inner(&second)
                ));
            } else {
                attrs.push(text);
            }
        }
        items.push(item(site, &attrs));
    }
    items.shuffle(rng);
    InsertionPlan { items }
}

pub fn one_case_suite(expected: &str) -> TestSuite {
    TestSuite::new(
        Comparison::ByteExact,
        vec![TestCase {
            id: "case-1".into(),
            args: vec![],
            stdin: vec![],
            expected_stdout: expected.as_bytes().to_vec(),
            timeout_s: 5.0,
        }],
    )
    .unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fake {
    Time(f64),
    CompileFail,
    TestFail,
    Timeout,
}

/// Decides a variant's fate from its text: the first rule whose needle
/// occurs in the source wins, otherwise `default` seconds per case.
/// Nothing is compiled or run.
pub struct FakeProfiler {
    pub rules: Vec<(String, Fake)>,
    pub default: f64,
}

impl FakeProfiler {
    pub fn new(default: f64, rules: &[(&str, Fake)]) -> Self {
        FakeProfiler {
            rules: rules.iter().map(|(n, f)| (n.to_string(), *f)).collect(),
            default,
        }
    }
}

impl Profiler for FakeProfiler {
    fn build(&self, source_text: &str, lang: Language, dir: &Path) -> Result<Build, ProfileError> {
        std::fs::create_dir_all(dir).unwrap();
        let path = dir.join(format!("prog.{}", lang.extension()));
        std::fs::write(&path, source_text).unwrap();
        let fails = self
            .rules
            .iter()
            .find(|(n, _)| source_text.contains(n.as_str()))
            .is_some_and(|(_, f)| *f == Fake::CompileFail);
        Ok(Build {
            source_path: path,
            binary: (!fails).then(|| dir.join("prog")),
            log: if fails {
                "prog.c:1:1: error: 'bogus' attribute directive ignored [-Werror=attributes]\n"
                    .into()
            } else {
                String::new()
            },
        })
    }

    fn measure(&self, build: &Build, suite: &TestSuite) -> ProfileResult {
        if build.binary.is_none() {
            return ProfileResult::compile_fail(build.log.clone());
        }
        let text = std::fs::read_to_string(&build.source_path).unwrap();
        let fate = self
            .rules
            .iter()
            .find(|(n, _)| text.contains(n.as_str()))
            .map_or(Fake::Time(self.default), |(_, f)| *f);
        let per_case = suite
            .cases
            .iter()
            .map(|c| {
                let (verdict, t, detail) = match fate {
                    Fake::Time(t) => (Verdict::Pass, t, String::new()),
                    Fake::TestFail => (
                        Verdict::TestFail,
                        self.default,
                        "stdout differs".to_string(),
                    ),
                    Fake::Timeout => (Verdict::Timeout, c.timeout_s, "timed out".to_string()),
                    Fake::CompileFail => unreachable!(),
                };
                CaseResult {
                    case_id: c.id.clone(),
                    verdict,
                    runtimes: vec![t; 3],
                    aggregate: t,
                    detail,
                }
            })
            .collect();
        ProfileResult::from_cases(String::new(), per_case)
    }

    fn compiler_id(&self, _lang: Language) -> String {
        "fake 1.0".into()
    }
}

pub fn gcc_available() -> bool {
    std::process::Command::new("gcc")
        .arg("--version")
        .output()
        .is_ok()
}
