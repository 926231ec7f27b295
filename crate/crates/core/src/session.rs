//! The refinement loop: prompt, sample N plans, apply, build, time, keep
//! the best, feed outcomes back, for T iterations.

use crate::applier::apply_plan;
use crate::feedback::{
    log_excerpt, update_feedback, FailureClass, FeedbackHistory, FeedbackRecord,
};
use crate::gateway::{construct_prompt, Backend, Gateway, Sampling, Strategy, DEFAULT_RETRIES};
use crate::kb::KnowledgeBase;
use crate::plan::{parse_plan, validate_plan, PlanError, ValidationReport};
use crate::profiler::{
    compare, geo_speedup, Build, Language, NoiseFloor, ProfileError, ProfileResult, Profiler,
    SpeedupReport, Status, TestSuite,
};
use crate::retriever::{build_query, retrieve, DEFAULT_K};
use crate::source::{extract_abstraction, SourceError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// T
    pub iterations: usize,
    /// N
    pub candidates: usize,
    pub strategy: Strategy,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub k: usize,
    pub noise_floor: NoiseFloor,
    pub retries: usize,
    pub max_requests: Option<usize>,
    pub workspace: PathBuf,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let s = Sampling::default();
        SessionConfig {
            iterations: 2,
            candidates: s.n,
            strategy: Strategy::CotFewshot,
            temperature: s.temperature,
            top_p: s.top_p,
            max_tokens: s.max_tokens,
            k: DEFAULT_K,
            noise_floor: NoiseFloor::default(),
            retries: DEFAULT_RETRIES,
            max_requests: None,
            workspace: PathBuf::from("hintforge-work"),
        }
    }
}

impl SessionConfig {
    pub fn sampling(&self) -> Sampling {
        Sampling {
            temperature: self.temperature,
            top_p: self.top_p,
            n: self.candidates,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("baseline does not pass its tests ({})", .0.status.as_str())]
    BaselineFails(Box<ProfileResult>),
    #[error("T and N must both be at least 1")]
    InvalidConfig,
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("workspace {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub candidate: usize,
    pub failure_class: Option<FailureClass>,
    pub status: Option<Status>,
    pub metric: Option<f64>,
    pub applied_hints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub samples: usize,
    pub retries: usize,
    pub candidates: Vec<CandidateSummary>,
    /// Best metric after the iteration; never increases.
    pub best_metric: f64,
    /// 1-based index of the candidate that became best, if any.
    pub improved_by: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub best_source: String,
    /// (iteration, candidate) that produced `best_source`; absent when it
    /// is the original.
    pub best_origin: Option<(usize, usize)>,
    pub baseline_profile: ProfileResult,
    pub best_profile: ProfileResult,
    pub speedup_report: SpeedupReport,
    pub history: FeedbackHistory,
    pub per_iteration_stats: Vec<IterationStats>,
    pub samples: usize,
    pub retries: usize,
    /// Why the session stopped early, if it did.
    pub aborted: Option<String>,
}

pub struct SessionInputs<'a> {
    pub source: &'a str,
    pub lang: Language,
    pub suite: &'a TestSuite,
    pub kb: &'a KnowledgeBase,
    pub backend: &'a dyn Backend,
    pub profiler: &'a dyn Profiler,
}

type Prepared = Result<(String, Vec<String>), (FailureClass, String)>;

struct Evaluated {
    record: FeedbackRecord,
    summary: CandidateSummary,
    source: Option<String>,
    profile: Option<ProfileResult>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), SessionError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn report_lines(report: &ValidationReport) -> String {
    report
        .invalid
        .iter()
        .map(|i| {
            format!(
                "hints[{}] {} {} line {}: {} ({})",
                i.index,
                i.kind.as_str(),
                i.symbol,
                i.line,
                i.reason.as_str(),
                i.detail
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn run_session(
    inputs: &SessionInputs,
    config: &SessionConfig,
) -> Result<SessionOutcome, SessionError> {
    if config.iterations == 0 || config.candidates == 0 {
        return Err(SessionError::InvalidConfig);
    }
    let ws = &config.workspace;
    std::fs::create_dir_all(ws).map_err(io_err(ws))?;
    let abstraction = extract_abstraction(inputs.source, "input")?;

    let baseline = inputs.profiler.profile(
        inputs.source,
        inputs.lang,
        inputs.suite,
        &ws.join("baseline"),
    )?;
    write(
        &ws.join("baseline").join("profile.json"),
        &serde_json::to_string_pretty(&baseline).unwrap(),
    )?;
    if baseline.status != Status::Pass {
        return Err(SessionError::BaselineFails(Box::new(baseline)));
    }

    let docs = retrieve(inputs.kb, &build_query(&abstraction), config.k);
    let gateway = Gateway::new(config.retries, config.max_requests);
    let mut best_source = inputs.source.to_string();
    let mut best_profile = baseline.clone();
    let mut best_origin = None;
    let mut history = FeedbackHistory::default();
    let mut stats = Vec::new();
    let mut aborted = None;

    for t in 1..=config.iterations {
        let iter_dir = ws.join(format!("iter_{t}"));
        let bundle = construct_prompt(
            inputs.source,
            &abstraction,
            &docs,
            &history.records,
            config.strategy,
            config.sampling(),
        )?;
        write(&iter_dir.join("prompt.txt"), &bundle.render())?;

        let retries_before = gateway.retry_count();
        let texts = match gateway.generate_plans(&bundle, inputs.backend) {
            Ok(t) => t,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };

        // Parse, validate and apply; then compile all variants concurrently.
        let mut prepared: Vec<(usize, Prepared)> = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            let k = i + 1;
            let cand_dir = iter_dir.join(format!("cand_{k}"));
            write(&cand_dir.join("plan.json"), text)?;
            let outcome = parse_plan(text)
                .map_err(|e| (FailureClass::Schema, e.to_string()))
                .and_then(|plan| {
                    validate_plan(&plan, &abstraction, inputs.kb).map_err(|e| match e {
                        PlanError::AllItemsInvalid(r) => (FailureClass::Site, report_lines(&r)),
                        other => (FailureClass::Schema, other.to_string()),
                    })
                })
                .and_then(|valid| {
                    write(
                        &cand_dir.join("validation.json"),
                        &serde_json::to_string_pretty(&valid.report).unwrap(),
                    )
                    .map_err(|e| (FailureClass::Site, e.to_string()))?;
                    apply_plan(inputs.source, &valid)
                        .map(|v| {
                            let ids = v.applied_hint_ids();
                            (v.source_text, ids)
                        })
                        .map_err(|e| (FailureClass::Site, e.to_string()))
                });
            prepared.push((k, outcome));
        }

        let builds: Vec<Option<Result<Build, ProfileError>>> = std::thread::scope(|s| {
            let handles: Vec<_> = prepared
                .iter()
                .map(|(k, p)| {
                    let dir = iter_dir.join(format!("cand_{k}"));
                    let lang = inputs.lang;
                    let profiler = inputs.profiler;
                    s.spawn(move || match p {
                        Ok((src, _)) => Some(profiler.build(src, lang, &dir)),
                        Err(_) => None,
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("build thread"))
                .collect()
        });

        let mut batch = Vec::new();
        let mut summaries = Vec::new();
        let mut improved_by = None;
        for ((k, prep), build) in prepared.into_iter().zip(builds) {
            let cand_dir = iter_dir.join(format!("cand_{k}"));
            let ev = match (prep, build) {
                (Err((class, log)), _) => Evaluated {
                    record: FeedbackRecord {
                        iteration: t,
                        candidate: k,
                        plan: texts[k - 1].clone(),
                        failure_class: Some(class),
                        log_excerpt: log,
                        metric: None,
                    },
                    summary: CandidateSummary {
                        candidate: k,
                        failure_class: Some(class),
                        status: None,
                        metric: None,
                        applied_hints: Vec::new(),
                    },
                    source: None,
                    profile: None,
                },
                (Ok((src, ids)), Some(build)) => {
                    let build = build?;
                    write(&cand_dir.join("compile.log"), &build.log)?;
                    let profile = inputs.profiler.measure(&build, inputs.suite);
                    write(
                        &cand_dir.join("profile.json"),
                        &serde_json::to_string_pretty(&profile).unwrap(),
                    )?;
                    let class = match profile.status {
                        Status::CompileFail => Some(FailureClass::Compile),
                        Status::TestFail => Some(FailureClass::Test),
                        Status::Timeout => Some(FailureClass::Timeout),
                        Status::Pass if compare(&profile, &best_profile, &config.noise_floor) => {
                            None
                        }
                        Status::Pass => Some(FailureClass::Slower),
                    };
                    Evaluated {
                        record: FeedbackRecord {
                            iteration: t,
                            candidate: k,
                            plan: texts[k - 1].clone(),
                            failure_class: class,
                            log_excerpt: log_excerpt(&profile.failure_log()),
                            metric: profile.metric,
                        },
                        summary: CandidateSummary {
                            candidate: k,
                            failure_class: class,
                            status: Some(profile.status),
                            metric: profile.metric,
                            applied_hints: ids,
                        },
                        source: Some(src),
                        profile: Some(profile),
                    }
                }
                (Ok(_), None) => unreachable!("every prepared variant is built"),
            };
            if ev.record.failure_class.is_none() {
                if let (Some(src), Some(profile)) = (ev.source, ev.profile) {
                    best_source = src;
                    best_profile = profile;
                    best_origin = Some((t, k));
                    improved_by = Some(k);
                }
            }
            batch.push(ev.record);
            summaries.push(ev.summary);
        }
        history = update_feedback(history, batch);
        stats.push(IterationStats {
            iteration: t,
            samples: texts.len(),
            retries: gateway.retry_count() - retries_before,
            candidates: summaries,
            best_metric: best_profile.metric.expect("best always passes"),
            improved_by,
        });
    }

    let case_ids = baseline
        .per_case
        .iter()
        .map(|c| c.case_id.clone())
        .collect();
    let speedup_report = match best_origin {
        None => SpeedupReport::identity(case_ids),
        Some(_) => geo_speedup(&baseline, &best_profile)
            .unwrap_or_else(|_| SpeedupReport::identity(case_ids)),
    };
    let outcome = SessionOutcome {
        best_source,
        best_origin,
        baseline_profile: baseline,
        best_profile,
        speedup_report,
        history,
        per_iteration_stats: stats,
        samples: gateway.requests(),
        retries: gateway.retry_count(),
        aborted,
    };
    write(
        &ws.join("outcome.json"),
        &serde_json::to_string_pretty(&outcome).unwrap(),
    )?;
    write(
        &ws.join(format!("best.{}", inputs.lang.extension())),
        &outcome.best_source,
    )?;
    Ok(outcome)
}
