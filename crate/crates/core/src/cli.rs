//! Command-line front end.

use crate::config::{load_config, CliConfig, ConfigError, ConfigLayer, CONFIG_FILE_NAME};
use crate::gateway::Strategy;
use crate::kb::{load_kb, save_kb, CurationRules, KbError, KnowledgeBase};
use crate::profiler::{
    geo_speedup, measure_interleaved, CompilerConfig, Language, MetricError, NativeProfiler,
    Profiler, SpeedupReport, TestSuite,
};
use crate::report::{emit_report, BenchTable, Payload, ReportEnvelope};
use crate::session::{run_session, SessionError, SessionInputs};
use crate::source::{decode_source, extract_abstraction, render_markers};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BASELINE_FAILS: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_CONFIG: i32 = 78;

#[derive(Debug, Parser)]
#[command(
    name = "hintforge",
    version,
    about = "Synthesize compiler hints for a C/C++ program and keep the fastest passing variant"
)]
pub struct Cli {
    /// Config file (defaults to ./hintforge.json when present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print reports as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the refinement loop on one source file.
    Optimize(OptimizeArgs),
    /// Show the structural abstraction and the marked source.
    Parse { source: PathBuf },
    /// Build, check or inspect the knowledge base.
    Kb {
        #[command(subcommand)]
        command: KbCmd,
    },
    /// Profile one source under two flag sets.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
pub enum KbCmd {
    /// Ingest a hint document into a knowledge base file.
    Build {
        doc: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile every entry's annotated example.
    Check {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        cc: Option<String>,
    },
    /// List entries, or show one.
    Show {
        id: Option<String>,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub cc: Option<String>,
    /// Repetitions per test case.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Per-case timeout in seconds, overriding the suite.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub workspace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub source: PathBuf,
    pub suite: PathBuf,
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// mock or http.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub backend_script: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Iterations.
    #[arg(short = 'T')]
    pub iterations: Option<usize>,
    /// Candidates per iteration.
    #[arg(short = 'N')]
    pub candidates: Option<usize>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Compiler flags, whitespace separated.
    #[arg(long, allow_hyphen_values = true)]
    pub flags: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub source: PathBuf,
    pub suite: PathBuf,
    #[arg(long = "flags-a", allow_hyphen_values = true)]
    pub flags_a: String,
    #[arg(long = "flags-b", allow_hyphen_values = true)]
    pub flags_b: String,
    /// Separate suite for the `b` run; its cases must match.
    #[arg(long)]
    pub suite_b: Option<PathBuf>,
    /// Also write the report envelope here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// An error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, e.to_string())
    }
}

fn split_flags(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_USAGE,
            format!("{what} {} not found", path.display()),
        ))
    }
}

fn read_source(path: &Path) -> Result<String, Failure> {
    require_file(path, "source file")?;
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    decode_source(&bytes)
        .map(str::to_string)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn load_suite(path: &Path, timeout: Option<f64>) -> Result<TestSuite, Failure> {
    require_file(path, "test suite")?;
    let mut suite = TestSuite::load(path).map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
    if let Some(t) = timeout {
        for c in &mut suite.cases {
            c.timeout_s = t;
        }
    }
    Ok(suite)
}

fn open_kb(path: Option<&Path>) -> Result<KnowledgeBase, Failure> {
    match path {
        None => Ok(KnowledgeBase::seed()),
        Some(p) => {
            require_file(p, "knowledge base")?;
            load_kb(p).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))
        }
    }
}

fn config(cli_path: Option<&Path>, flags: ConfigLayer) -> Result<CliConfig, Failure> {
    let default = Path::new(CONFIG_FILE_NAME);
    let path = match cli_path {
        Some(p) => {
            require_file(p, "config file")?;
            Some(p)
        }
        None => default.is_file().then_some(default),
    };
    Ok(load_config(path, flags)?)
}

fn common_layer(c: &CommonArgs) -> ConfigLayer {
    ConfigLayer {
        cc: c.cc.clone(),
        reps: c.reps,
        timeout_s: c.timeout,
        workspace: c.workspace.clone(),
        ..Default::default()
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn speedup_table(r: &SpeedupReport) -> String {
    let width = r.case_ids.iter().map(|c| c.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:<width$}  ratio\n", "case");
    for (id, ratio) in r.case_ids.iter().zip(&r.per_case_ratio) {
        out.push_str(&format!("{id:<width$}  {ratio:.3}\n"));
    }
    out.push_str(&format!("geo-mean speedup {:.3}x\n", r.geo_mean));
    out
}

fn cmd_optimize(
    args: &OptimizeArgs,
    cfg_path: Option<&Path>,
    as_json: bool,
) -> Result<i32, Failure> {
    let flags = ConfigLayer {
        kb: args.kb.clone(),
        backend: args.backend.clone(),
        backend_script: args.backend_script.clone(),
        model: args.model.clone(),
        endpoint: args.endpoint.clone(),
        iterations: args.iterations,
        candidates: args.candidates,
        strategy: args.strategy,
        flags: args.flags.as_deref().map(split_flags),
        ..common_layer(&args.common)
    };
    let cfg = config(cfg_path, flags)?;
    let source = read_source(&args.source)?;
    let suite = load_suite(&args.suite, cfg.timeout_s)?;
    let kb = open_kb(cfg.kb_path.as_deref())?;
    let backend_cfg = cfg
        .backend
        .as_ref()
        .ok_or_else(|| Failure::new(EXIT_CONFIG, "no backend configured (use --backend)"))?;
    let backend = backend_cfg
        .build()
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let lang = Language::from_path(&args.source);
    let profiler = NativeProfiler::new(cfg.compiler.clone(), cfg.reps);
    let inputs = SessionInputs {
        source: &source,
        lang,
        suite: &suite,
        kb: &kb,
        backend: backend.as_ref(),
        profiler: &profiler,
    };
    let outcome = match run_session(&inputs, &cfg.session) {
        Ok(o) => o,
        Err(SessionError::BaselineFails(p)) => {
            let detail = crate::feedback::log_excerpt(&p.failure_log());
            return Err(Failure::new(
                EXIT_BASELINE_FAILS,
                format!(
                    "baseline does not pass its tests ({})\n{detail}",
                    p.status.as_str()
                ),
            ));
        }
        Err(SessionError::Source(e)) => return Err(Failure::new(EXIT_DATA, e.to_string())),
        Err(e) => return Err(Failure::new(EXIT_FAILURE, e.to_string())),
    };
    let ws = &cfg.session.workspace;
    let envelope = ReportEnvelope::new(
        kb.version(),
        &profiler.compiler_id(lang),
        Payload::Session(Box::new(outcome)),
    );
    emit_report(&envelope, &ws.join("report.json"))
        .map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    if as_json {
        print_json(&envelope);
    } else if let Payload::Session(o) = &envelope.payload {
        println!("baseline flags: {}", cfg.compiler.flags.join(" "));
        println!(
            "baseline  {:.6} s",
            o.baseline_profile.metric.unwrap_or(f64::NAN)
        );
        match o.best_origin {
            Some((t, k)) => println!(
                "best      {:.6} s  (iteration {t}, candidate {k})",
                o.best_profile.metric.unwrap_or(f64::NAN)
            ),
            None => println!("best      original program (no candidate cleared the noise floor)"),
        }
        print!("{}", speedup_table(&o.speedup_report));
        if let Some(why) = &o.aborted {
            println!("stopped early: {why}");
        }
        println!("samples {} (retries {})", o.samples, o.retries);
        println!("outcome: {}", ws.join("outcome.json").display());
        println!(
            "best source: {}",
            ws.join(format!("best.{}", lang.extension())).display()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_parse(source_path: &Path, as_json: bool) -> Result<i32, Failure> {
    let source = read_source(source_path)?;
    let file_id = source_path.display().to_string();
    let abs = extract_abstraction(&source, &file_id)
        .map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
    let marked =
        render_markers(&abs, &source).map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
    if as_json {
        print_json(&json!({"abstraction": abs, "sites": abs.sites(), "marked_source": marked}));
    } else {
        println!("{:>4}  {:<9}  {:<8}  symbol", "id", "kind", "pos");
        for s in abs.sites() {
            println!(
                "{:>4}  {:<9}  {:<8}  {}",
                s.id,
                s.kind.as_str(),
                s.pos.to_string(),
                s.symbol
            );
        }
        println!();
        print!("{marked}");
    }
    Ok(EXIT_OK)
}

/// Compiles one annotated example to an object file.
pub fn check_example(cc: &str, example: &str, dir: &Path, stem: &str) -> Result<(), String> {
    let src = dir.join(format!("{stem}.c"));
    std::fs::write(&src, example).map_err(|e| e.to_string())?;
    let out = Command::new(cc)
        .args(["-c", "-O2", "-fopenmp", "-Werror=attributes", "-o"])
        .arg(dir.join(format!("{stem}.o")))
        .arg(&src)
        .output()
        .map_err(|e| format!("{cc}: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn cmd_kb(cmd: &KbCmd, cfg_path: Option<&Path>, as_json: bool) -> Result<i32, Failure> {
    match cmd {
        KbCmd::Build { doc, out } => {
            require_file(doc, "hint document")?;
            let text = std::fs::read_to_string(doc)
                .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
            let kb = KnowledgeBase::from_doc(&text, &CurationRules::default())
                .map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
            save_kb(&kb, out).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
            if as_json {
                print_json(&json!({
                    "out": out, "version": kb.version(), "entries": kb.len(),
                    "excluded": kb.excluded_count(), "source_doc_hash": kb.source_doc_hash()
                }));
            } else {
                println!(
                    "wrote {} ({} entries, {} excluded, version {})",
                    out.display(),
                    kb.len(),
                    kb.excluded_count(),
                    kb.version()
                );
            }
            Ok(EXIT_OK)
        }
        KbCmd::Check { kb, cc } => {
            let cfg = config(
                cfg_path,
                ConfigLayer {
                    kb: kb.clone(),
                    cc: cc.clone(),
                    ..Default::default()
                },
            )?;
            let kb = open_kb(cfg.kb_path.as_deref())?;
            let cc = cfg.compiler.compiler_for(Language::C);
            let dir = tempfile::tempdir().map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
            let mut results = Vec::new();
            for (i, e) in kb.entries().enumerate() {
                results.push((
                    e.hint_id.clone(),
                    check_example(&cc, &e.example_annotated, dir.path(), &format!("ex{i}")),
                ));
            }
            let failed = results.iter().filter(|r| r.1.is_err()).count();
            if as_json {
                let rows: Vec<_> = results
                    .iter()
                    .map(|(id, r)| json!({"hint_id": id, "ok": r.is_ok(), "log": r.as_ref().err()}))
                    .collect();
                print_json(
                    &json!({"compiler": cc, "checked": results.len(), "failed": failed, "results": rows}),
                );
            } else {
                for (id, r) in &results {
                    match r {
                        Ok(()) => println!("ok    {id}"),
                        Err(log) => println!("FAIL  {id}\n{}", crate::feedback::log_excerpt(log)),
                    }
                }
                println!("{} checked, {failed} failed", results.len());
            }
            Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
        }
        KbCmd::Show { id, kb } => {
            let cfg = config(
                cfg_path,
                ConfigLayer {
                    kb: kb.clone(),
                    ..Default::default()
                },
            )?;
            let kb = open_kb(cfg.kb_path.as_deref())?;
            match id {
                None => {
                    if as_json {
                        print_json(&kb.entries().collect::<Vec<_>>());
                    } else {
                        for e in kb.entries() {
                            println!("{:<28} {}", e.hint_id, e.surface_form);
                        }
                    }
                    Ok(EXIT_OK)
                }
                Some(id) => match kb.lookup(id) {
                    Ok(e) => {
                        if as_json {
                            print_json(e);
                        } else {
                            let kinds: Vec<&str> =
                                e.site_kinds.iter().map(|k| k.as_str()).collect();
                            println!("{}\n  form: {}\n  sites: {}\n  category: {}\n  {}\n  applies: {}\n\n{}", e.hint_id, e.surface_form, kinds.join(", "), e.category, e.description, e.applicability, e.example_annotated);
                        }
                        Ok(EXIT_OK)
                    }
                    Err(KbError::UnknownHint(id)) => {
                        Err(Failure::new(EXIT_FAILURE, format!("unknown hint `{id}`")))
                    }
                    Err(e) => Err(Failure::new(EXIT_FAILURE, e.to_string())),
                },
            }
        }
    }
}

/// Profiles `source` under two compiler configurations and compares them.
#[allow(clippy::too_many_arguments)]
pub fn bench(
    source: &str,
    lang: Language,
    suite_a: &TestSuite,
    suite_b: &TestSuite,
    cfg_a: &CompilerConfig,
    cfg_b: &CompilerConfig,
    reps: usize,
    dir: &Path,
) -> Result<Result<BenchTable, MetricError>, crate::profiler::ProfileError> {
    let build_a = NativeProfiler::new(cfg_a.clone(), reps).build(source, lang, &dir.join("a"))?;
    let build_b = NativeProfiler::new(cfg_b.clone(), reps).build(source, lang, &dir.join("b"))?;
    let (a, b) = measure_interleaved(&build_a, suite_a, &build_b, suite_b, reps);
    Ok(geo_speedup(&a, &b).map(|speedup| BenchTable {
        flags_a: cfg_a.flags.clone(),
        flags_b: cfg_b.flags.clone(),
        profile_a: a,
        profile_b: b,
        speedup,
    }))
}

fn cmd_bench(args: &BenchArgs, cfg_path: Option<&Path>, as_json: bool) -> Result<i32, Failure> {
    let cfg = config(cfg_path, common_layer(&args.common))?;
    let source = read_source(&args.source)?;
    let suite_a = load_suite(&args.suite, cfg.timeout_s)?;
    let suite_b = match &args.suite_b {
        Some(p) => load_suite(p, cfg.timeout_s)?,
        None => suite_a.clone(),
    };
    let lang = Language::from_path(&args.source);
    // Plain flag comparisons: attribute diagnostics stay warnings here.
    let base = CompilerConfig {
        strict_attributes: false,
        ..cfg.compiler.clone()
    };
    let cfg_a = base.with_flags(split_flags(&args.flags_a));
    let cfg_b = base.with_flags(split_flags(&args.flags_b));
    let tmp;
    let dir = match &args.common.workspace {
        Some(w) => w.clone(),
        None => {
            tmp = tempfile::tempdir().map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
            tmp.path().to_path_buf()
        }
    };
    let table = match bench(
        &source, lang, &suite_a, &suite_b, &cfg_a, &cfg_b, cfg.reps, &dir,
    ) {
        Err(e) => return Err(Failure::new(EXIT_FAILURE, e.to_string())),
        Ok(Err(e @ (MetricError::CaseSetMismatch | MetricError::NonPositiveTime(..)))) => {
            return Err(Failure::new(EXIT_DATA, e.to_string()))
        }
        Ok(Err(e @ MetricError::NotPassing(_))) => {
            return Err(Failure::new(EXIT_FAILURE, e.to_string()))
        }
        Ok(Ok(t)) => t,
    };
    let envelope = ReportEnvelope::new(
        "-",
        &NativeProfiler::new(base, 1).compiler_id(lang),
        Payload::Bench(Box::new(table)),
    );
    if let Some(out) = &args.out {
        emit_report(&envelope, out).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    }
    if as_json {
        print_json(&envelope);
    } else if let Payload::Bench(t) = &envelope.payload {
        println!(
            "a: {}  ({:.6} s)",
            t.flags_a.join(" "),
            t.profile_a.metric.unwrap_or(f64::NAN)
        );
        println!(
            "b: {}  ({:.6} s)",
            t.flags_b.join(" "),
            t.profile_b.metric.unwrap_or(f64::NAN)
        );
        print!("{}", speedup_table(&t.speedup));
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = cli.config.as_deref();
    let result = match &cli.command {
        Cmd::Optimize(a) => cmd_optimize(a, cfg, cli.json),
        Cmd::Parse { source } => cmd_parse(source, cli.json),
        Cmd::Kb { command } => cmd_kb(command, cfg, cli.json),
        Cmd::Bench(a) => cmd_bench(a, cfg, cli.json),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            if cli.json {
                print_json(&json!({"error": f.message, "exit_code": f.code}));
            } else {
                eprintln!("hintforge: {}", f.message);
            }
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run(["hintforge", "optimize"]), EXIT_USAGE);
        assert_eq!(run(["hintforge", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["hintforge", "--help"]), EXIT_OK);
        assert_eq!(run(["hintforge", "parse", "/nonexistent/x.c"]), EXIT_USAGE);
    }

    #[test]
    fn flags_split_on_whitespace() {
        assert_eq!(
            split_flags(" -O3  -march=native "),
            vec!["-O3", "-march=native"]
        );
    }
}
