//! Compiling, testing and timing program variants.

mod metrics;
mod suite;

pub use metrics::{
    aggregate, compare, geo_mean, geo_speedup, MetricError, NoiseFloor, SpeedupReport,
};
pub use suite::{Comparison, SuiteError, TestCase, TestSuite, DEFAULT_EPS, DEFAULT_TIMEOUT_S};

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;
use wait_timeout::ChildExt;

pub const DEFAULT_REPS: usize = 10;

/// Held while anything is being timed, so measurements never overlap.
pub static TIMING_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Cxx,
}

impl Language {
    pub fn from_path(path: &Path) -> Language {
        match path.extension().and_then(|e| e.to_str()) {
            Some("c") => Language::C,
            _ if path.extension().is_none() => Language::C,
            _ => Language::Cxx,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Language::C => "c",
            Language::Cxx => "cpp",
        }
    }

    pub fn default_compiler(self) -> &'static str {
        match self {
            Language::C => "gcc",
            Language::Cxx => "g++",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompilerConfig {
    /// Compiler executable; `gcc`/`g++` by source language when absent.
    pub cc: Option<String>,
    pub flags: Vec<String>,
    /// Alternative flag set for comparisons against an aggressive baseline.
    pub extra_flags_ofast: Vec<String>,
    /// Turn attribute warnings (ignored or unknown attributes) into errors.
    pub strict_attributes: bool,
    pub ldflags: Vec<String>,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        CompilerConfig {
            cc: None,
            flags: vec!["-O3".into()],
            extra_flags_ofast: vec!["-Ofast".into()],
            strict_attributes: true,
            ldflags: vec!["-lm".into()],
        }
    }
}

impl CompilerConfig {
    pub fn compiler_for(&self, lang: Language) -> String {
        self.cc
            .clone()
            .unwrap_or_else(|| lang.default_compiler().to_string())
    }

    pub fn with_flags(&self, flags: Vec<String>) -> Self {
        CompilerConfig {
            flags,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("compiler `{0}` not found")]
    CompilerNotFound(String),
    #[error("cannot write to {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "COMPILE_FAIL")]
    CompileFail,
    #[serde(rename = "TEST_FAIL")]
    TestFail,
    #[serde(rename = "TIMEOUT")]
    Timeout,
    #[serde(rename = "PASS")]
    Pass,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::CompileFail => "COMPILE_FAIL",
            Status::TestFail => "TEST_FAIL",
            Status::Timeout => "TIMEOUT",
            Status::Pass => "PASS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "TEST_FAIL")]
    TestFail,
    #[serde(rename = "TIMEOUT")]
    Timeout,
}

impl Verdict {
    fn status(self) -> Status {
        match self {
            Verdict::Pass => Status::Pass,
            Verdict::TestFail => Status::TestFail,
            Verdict::Timeout => Status::Timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub verdict: Verdict,
    /// Wall-clock seconds per repetition run (stops at the first failure).
    pub runtimes: Vec<f64>,
    pub aggregate: f64,
    /// Why the case failed, empty on success.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub status: Status,
    pub compiler_log: String,
    pub per_case: Vec<CaseResult>,
    /// Sum of per-case aggregates in seconds; present iff PASS.
    pub metric: Option<f64>,
}

impl ProfileResult {
    pub fn compile_fail(log: String) -> Self {
        ProfileResult {
            status: Status::CompileFail,
            compiler_log: log,
            per_case: Vec::new(),
            metric: None,
        }
    }

    /// Derives status (worst verdict) and metric from case results.
    pub fn from_cases(compiler_log: String, per_case: Vec<CaseResult>) -> Self {
        let status = per_case
            .iter()
            .map(|c| c.verdict.status())
            .min()
            .unwrap_or(Status::Pass);
        let metric = (status == Status::Pass).then(|| per_case.iter().map(|c| c.aggregate).sum());
        ProfileResult {
            status,
            compiler_log,
            per_case,
            metric,
        }
    }

    /// Failure details of the first failing case, for feedback logs.
    pub fn failure_log(&self) -> String {
        match self.status {
            Status::CompileFail => self.compiler_log.clone(),
            _ => self
                .per_case
                .iter()
                .filter(|c| c.verdict != Verdict::Pass)
                .map(|c| format!("{}: {}", c.case_id, c.detail))
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

/// A compiled (or failed) variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Build {
    pub source_path: PathBuf,
    pub binary: Option<PathBuf>,
    pub log: String,
}

/// Compiles `source_path` into `binary`. A compiler diagnostic is a
/// [`Build`] without a binary; only a missing compiler is an error.
pub fn compile(
    source_path: &Path,
    binary: &Path,
    lang: Language,
    cfg: &CompilerConfig,
) -> Result<Build, ProfileError> {
    let cc = cfg.compiler_for(lang);
    let mut cmd = Command::new(&cc);
    cmd.args(&cfg.flags);
    if cfg.strict_attributes {
        cmd.arg("-Werror=attributes");
    }
    cmd.arg("-o")
        .arg(binary)
        .arg(source_path)
        .args(&cfg.ldflags);
    let out = cmd.output().map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ProfileError::CompilerNotFound(cc.clone()),
        _ => ProfileError::Io {
            path: source_path.to_path_buf(),
            source: e,
        },
    })?;
    let mut log = String::from_utf8_lossy(&out.stderr).into_owned();
    log.push_str(&String::from_utf8_lossy(&out.stdout));
    Ok(Build {
        source_path: source_path.to_path_buf(),
        binary: (out.status.success() && binary.exists()).then(|| binary.to_path_buf()),
        log,
    })
}

/// Writes `source_text` to `dir/<stem>.<ext>` and compiles it to `dir/<stem>`.
pub fn compile_source(
    source_text: &str,
    lang: Language,
    cfg: &CompilerConfig,
    dir: &Path,
    stem: &str,
) -> Result<Build, ProfileError> {
    std::fs::create_dir_all(dir).map_err(|source| ProfileError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let src = dir.join(format!("{stem}.{}", lang.extension()));
    std::fs::write(&src, source_text).map_err(|source| ProfileError::Io {
        path: src.clone(),
        source,
    })?;
    compile(&src, &dir.join(stem), lang, cfg)
}

struct RunOutcome {
    elapsed: f64,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    timed_out: bool,
    status: Option<std::process::ExitStatus>,
}

fn run_once(binary: &Path, case: &TestCase) -> std::io::Result<RunOutcome> {
    let start = Instant::now();
    let mut child = Command::new(binary)
        .args(&case.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = case.stdin.clone();
    let writer = std::thread::spawn(move || {
        // a child that exits without reading closes the pipe; not an error
        let _ = stdin.write_all(&input);
    });
    let mut out_pipe = child.stdout.take().expect("piped stdout");
    let mut err_pipe = child.stderr.take().expect("piped stderr");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = out_pipe.read_to_end(&mut buf);
        buf
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = err_pipe.read_to_end(&mut buf);
        buf
    });
    let waited = child.wait_timeout(Duration::from_secs_f64(case.timeout_s))?;
    let (status, timed_out) = match waited {
        Some(s) => (Some(s), false),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            (None, true)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let _ = writer.join();
    let stdout = reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    Ok(RunOutcome {
        elapsed,
        stdout,
        stderr,
        timed_out,
        status,
    })
}

fn describe_exit(status: std::process::ExitStatus) -> String {
    use std::os::unix::process::ExitStatusExt;
    match (status.code(), status.signal()) {
        (Some(code), _) => format!("exited with status {code}"),
        (None, Some(sig)) => format!("killed by signal {sig}"),
        _ => "terminated abnormally".into(),
    }
}

fn excerpt(bytes: &[u8], limit: usize) -> String {
    let s = String::from_utf8_lossy(bytes);
    if s.len() <= limit {
        return s.into_owned();
    }
    let mut cut = limit;
    while !s.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}...", &s[..cut])
}

/// Runs one case `reps` times. Stops at the first failing repetition.
pub fn run_case(
    binary: &Path,
    case: &TestCase,
    reps: usize,
    comparison: &Comparison,
) -> CaseResult {
    let mut runtimes = Vec::with_capacity(reps);
    let fail = |verdict, runtimes: Vec<f64>, detail: String| CaseResult {
        case_id: case.id.clone(),
        verdict,
        aggregate: aggregate(&runtimes),
        runtimes,
        detail,
    };
    for _ in 0..reps.max(1) {
        let r = match run_once(binary, case) {
            Ok(r) => r,
            Err(e) => {
                return fail(
                    Verdict::TestFail,
                    runtimes,
                    format!("cannot run {}: {e}", binary.display()),
                )
            }
        };
        runtimes.push(r.elapsed);
        if r.timed_out {
            return fail(
                Verdict::Timeout,
                runtimes,
                format!("timed out after {}s", case.timeout_s),
            );
        }
        let status = r.status.expect("finished child has a status");
        if !status.success() {
            return fail(
                Verdict::TestFail,
                runtimes,
                format!(
                    "{}; stderr: {}",
                    describe_exit(status),
                    excerpt(&r.stderr, 400)
                ),
            );
        }
        if !comparison.matches(&case.expected_stdout, &r.stdout) {
            return fail(
                Verdict::TestFail,
                runtimes,
                format!(
                    "wrong output: expected {:?}, got {:?}",
                    excerpt(&case.expected_stdout, 200),
                    excerpt(&r.stdout, 200)
                ),
            );
        }
    }
    CaseResult {
        case_id: case.id.clone(),
        verdict: Verdict::Pass,
        aggregate: aggregate(&runtimes),
        runtimes,
        detail: String::new(),
    }
}

/// Compilation plus measurement. Implementations other than
/// [`NativeProfiler`] exist for tests that inject timings.
pub trait Profiler: Sync {
    fn build(&self, source_text: &str, lang: Language, dir: &Path) -> Result<Build, ProfileError>;

    fn measure(&self, build: &Build, suite: &TestSuite) -> ProfileResult;

    fn profile(
        &self,
        source_text: &str,
        lang: Language,
        suite: &TestSuite,
        dir: &Path,
    ) -> Result<ProfileResult, ProfileError> {
        let build = self.build(source_text, lang, dir)?;
        Ok(self.measure(&build, suite))
    }

    /// Identification of the toolchain, for reports.
    fn compiler_id(&self, lang: Language) -> String {
        let _ = lang;
        "unknown".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NativeProfiler {
    pub compiler: CompilerConfig,
    pub reps: usize,
}

impl NativeProfiler {
    pub fn new(compiler: CompilerConfig, reps: usize) -> Self {
        NativeProfiler { compiler, reps }
    }
}

impl Profiler for NativeProfiler {
    fn build(&self, source_text: &str, lang: Language, dir: &Path) -> Result<Build, ProfileError> {
        compile_source(source_text, lang, &self.compiler, dir, "prog")
    }

    fn measure(&self, build: &Build, suite: &TestSuite) -> ProfileResult {
        let Some(binary) = &build.binary else {
            return ProfileResult::compile_fail(build.log.clone());
        };
        let _guard = TIMING_LOCK.lock().unwrap_or_else(|p| p.into_inner());
        let per_case = suite
            .cases
            .iter()
            .map(|c| run_case(binary, c, self.reps, &suite.comparison))
            .collect();
        ProfileResult::from_cases(build.log.clone(), per_case)
    }

    fn compiler_id(&self, lang: Language) -> String {
        compiler_id(&self.compiler.compiler_for(lang))
    }
}

/// Measures two builds with their repetitions alternated (a, b, a, b, ...)
/// so drift in machine load lands on both sides alike. Cases are paired by
/// position.
pub fn measure_interleaved(
    a: &Build,
    suite_a: &TestSuite,
    b: &Build,
    suite_b: &TestSuite,
    reps: usize,
) -> (ProfileResult, ProfileResult) {
    struct Side<'s> {
        binary: Option<&'s Path>,
        suite: &'s TestSuite,
        results: Vec<CaseResult>,
    }
    let mut sides = [
        Side {
            binary: a.binary.as_deref(),
            suite: suite_a,
            results: vec![],
        },
        Side {
            binary: b.binary.as_deref(),
            suite: suite_b,
            results: vec![],
        },
    ];
    let _guard = TIMING_LOCK.lock().unwrap_or_else(|p| p.into_inner());
    let n = suite_a.cases.len().max(suite_b.cases.len());
    for i in 0..n {
        let mut runs: [Vec<f64>; 2] = Default::default();
        let mut done: [Option<CaseResult>; 2] = [None, None];
        for _ in 0..reps.max(1) {
            for (s, side) in sides.iter().enumerate() {
                let (Some(bin), Some(case)) = (side.binary, side.suite.cases.get(i)) else {
                    continue;
                };
                if done[s].is_some() {
                    continue;
                }
                let r = run_case(bin, case, 1, &side.suite.comparison);
                runs[s].extend(&r.runtimes);
                if r.verdict != Verdict::Pass {
                    done[s] = Some(CaseResult {
                        aggregate: aggregate(&runs[s]),
                        runtimes: runs[s].clone(),
                        ..r
                    });
                }
            }
        }
        for (s, side) in sides.iter_mut().enumerate() {
            let (Some(_), Some(case)) = (side.binary, side.suite.cases.get(i)) else {
                continue;
            };
            let r = done[s].take().unwrap_or_else(|| CaseResult {
                case_id: case.id.clone(),
                verdict: Verdict::Pass,
                aggregate: aggregate(&runs[s]),
                runtimes: std::mem::take(&mut runs[s]),
                detail: String::new(),
            });
            side.results.push(r);
        }
    }
    let [sa, sb] = sides;
    let finish = |build: &Build, side: Side| match side.binary {
        Some(_) => ProfileResult::from_cases(build.log.clone(), side.results),
        None => ProfileResult::compile_fail(build.log.clone()),
    };
    (finish(a, sa), finish(b, sb))
}

/// First line of `<cc> --version`.
pub fn compiler_id(cc: &str) -> String {
    Command::new(cc)
        .arg("--version")
        .output()
        .ok()
        .and_then(|o| {
            String::from_utf8_lossy(&o.stdout)
                .lines()
                .next()
                .map(str::to_string)
        })
        .unwrap_or_else(|| format!("{cc} (unavailable)"))
}
