use super::{ProfileResult, Status};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("profiles cover different test cases")]
    CaseSetMismatch,
    #[error("non-positive runtime {0} in case {1}")]
    NonPositiveTime(f64, String),
    #[error("profile status is {0:?}, not PASS")]
    NotPassing(Status),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub case_ids: Vec<String>,
    pub per_case_ratio: Vec<f64>,
    pub geo_mean: f64,
}

impl SpeedupReport {
    /// The report of a candidate that is the baseline itself.
    pub fn identity(case_ids: Vec<String>) -> Self {
        SpeedupReport {
            per_case_ratio: vec![1.0; case_ids.len()],
            case_ids,
            geo_mean: 1.0,
        }
    }
}

/// Mean of the repetitions after dropping the single largest one.
pub fn aggregate(runtimes: &[f64]) -> f64 {
    match runtimes.len() {
        0 => f64::NAN,
        1 => runtimes[0],
        n => {
            let max_idx = runtimes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let sum: f64 = runtimes
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != max_idx)
                .map(|(_, t)| t)
                .sum();
            sum / (n - 1) as f64
        }
    }
}

/// (Π ratio_i)^(1/N), computed as a product of N-th roots to stay in range.
pub fn geo_mean(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        return 1.0;
    }
    let inv = 1.0 / ratios.len() as f64;
    ratios.iter().map(|r| r.powf(inv)).product()
}

/// Per-case baseline/candidate ratios and their geometric mean.
pub fn geo_speedup(
    baseline: &ProfileResult,
    candidate: &ProfileResult,
) -> Result<SpeedupReport, MetricError> {
    for p in [baseline, candidate] {
        if p.status != Status::Pass {
            return Err(MetricError::NotPassing(p.status));
        }
    }
    if baseline.per_case.len() != candidate.per_case.len()
        || baseline
            .per_case
            .iter()
            .zip(&candidate.per_case)
            .any(|(a, b)| a.case_id != b.case_id)
    {
        return Err(MetricError::CaseSetMismatch);
    }
    let mut ratios = Vec::with_capacity(baseline.per_case.len());
    for (b, c) in baseline.per_case.iter().zip(&candidate.per_case) {
        for (t, id) in [(b.aggregate, &b.case_id), (c.aggregate, &c.case_id)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(MetricError::NonPositiveTime(t, id.clone()));
            }
        }
        ratios.push(b.aggregate / c.aggregate);
    }
    Ok(SpeedupReport {
        case_ids: baseline
            .per_case
            .iter()
            .map(|c| c.case_id.clone())
            .collect(),
        geo_mean: geo_mean(&ratios),
        per_case_ratio: ratios,
    })
}

/// The dead-band a candidate must clear to replace the best.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFloor {
    pub abs_s: f64,
    pub rel: f64,
}

impl Default for NoiseFloor {
    fn default() -> Self {
        NoiseFloor {
            abs_s: 0.001,
            rel: 0.02,
        }
    }
}

impl NoiseFloor {
    pub fn margin(&self, best_metric: f64) -> f64 {
        self.abs_s.max(self.rel * best_metric)
    }
}

/// True when `candidate` is faster than `best` by more than the noise floor.
/// Lower metric is better.
pub fn compare(candidate: &ProfileResult, best: &ProfileResult, floor: &NoiseFloor) -> bool {
    match (candidate.status, candidate.metric, best.metric) {
        (Status::Pass, Some(c), Some(b)) => c < b - floor.margin(b),
        _ => false,
    }
}
