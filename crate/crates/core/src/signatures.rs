//! Reasoning-signature diagnostics computed from judgments, not from fits:
//! explaining away, Markov violation, Spearman alignment, and bootstrap
//! confidence intervals. A collider model cannot violate the Markov
//! condition and never shows negative explaining away, so these quantities
//! are informative exactly because they are read off the raw judgment means.

use crate::estimator::TaskObservations;
use crate::tasks::TaskId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default Markov-violation threshold ε.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default bootstrap replicate count B.
pub const DEFAULT_BOOTSTRAP: usize = 1000;
/// Default confidence level for bootstrap intervals.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// A two-sided bootstrap confidence interval on the normalized scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiInterval {
    pub lower: f64,
    pub upper: f64,
}

/// The per-group diagnostic bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureReport {
    /// judgment(VIII) − judgment(VI); positive means explaining away.
    pub ea: f64,
    /// |judgment(IV) − judgment(V)|.
    pub mv_magnitude: f64,
    /// mv_magnitude > ε.
    pub mv_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman_vs_reference: Option<f64>,
    pub loocv_r2: f64,
    /// Per-task 95% (by default) bootstrap interval for the mean judgment.
    pub ci: [CiInterval; 11],
}

/// Why a diagnostic could not be computed.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SignatureError {
    #[error("task {0} is required for this diagnostic but has no responses")]
    MissingTask(TaskId),
    #[error("constant vector: the {0} argument has zero rank variance")]
    ConstantVector(&'static str),
    #[error("vectors have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("invalid {what}: {value}")]
    InvalidArgument { what: &'static str, value: f64 },
}

fn required_mean(obs: &TaskObservations, task: TaskId) -> Result<f64, SignatureError> {
    obs.mean(task).ok_or(SignatureError::MissingTask(task))
}

/// Explaining-away magnitude: mean judgment on VIII minus mean judgment on
/// VI. Positive when confirming the other cause lowered belief in C1.
pub fn explaining_away(obs: &TaskObservations) -> Result<f64, SignatureError> {
    Ok(required_mean(obs, TaskId::VIII)? - required_mean(obs, TaskId::VI)?)
}

/// Markov-violation magnitude |IV − V| and whether it exceeds ε.
pub fn markov_violation(
    obs: &TaskObservations,
    epsilon: f64,
) -> Result<(f64, bool), SignatureError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(SignatureError::InvalidArgument {
            what: "epsilon",
            value: epsilon,
        });
    }
    let magnitude = (required_mean(obs, TaskId::IV)? - required_mean(obs, TaskId::V)?).abs();
    Ok((magnitude, magnitude > epsilon))
}

/// Ranks with ties sharing their average rank (1-based).
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the mean of ranks start+1..=end.
        let shared = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, SignatureError> {
    if a.len() != b.len() {
        return Err(SignatureError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        var_a += (x - ma) * (x - ma);
        var_b += (y - mb) * (y - mb);
    }
    if var_a == 0.0 {
        return Err(SignatureError::ConstantVector("first"));
    }
    if var_b == 0.0 {
        return Err(SignatureError::ConstantVector("second"));
    }
    Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

/// Linear-interpolation percentile of an already sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for each task's mean judgment.
///
/// Each task resamples its own responses with replacement `b` times under an
/// independent, task-indexed RNG stream of the given seed, so a task's
/// interval never depends on which other tasks were observed.
pub fn bootstrap_ci(
    obs: &TaskObservations,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<[CiInterval; 11], SignatureError> {
    if b == 0 {
        return Err(SignatureError::InvalidArgument {
            what: "bootstrap replicate count",
            value: 0.0,
        });
    }
    if !(0.0 < level && level < 1.0) {
        return Err(SignatureError::InvalidArgument {
            what: "confidence level",
            value: level,
        });
    }

    let alpha = (1.0 - level) / 2.0;
    let mut out = [CiInterval {
        lower: 0.0,
        upper: 0.0,
    }; 11];
    for task in TaskId::ALL {
        let responses = obs.responses(task);
        let n = responses.len();
        if n == 0 {
            return Err(SignatureError::MissingTask(task));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(task.index() as u64);
        let mut means = Vec::with_capacity(b);
        for _ in 0..b {
            let mut sum = 0.0;
            for _ in 0..n {
                sum += responses[rng.gen_range(0..n)];
            }
            means.push(sum / n as f64);
        }
        means.sort_by(f64::total_cmp);
        out[task.index()] = CiInterval {
            lower: percentile(&means, alpha),
            upper: percentile(&means, 1.0 - alpha),
        };
    }
    Ok(out)
}

impl SignatureReport {
    /// Assembles the full diagnostic bundle for one agent group. The LOOCV
    /// score is passed in because it belongs to the fitting layer; the
    /// reference battery, when given, is the comparison agent's task means.
    pub fn compute(
        obs: &TaskObservations,
        epsilon: f64,
        bootstrap_b: usize,
        level: f64,
        seed: u64,
        loocv_r2: f64,
        reference_means: Option<&[f64]>,
    ) -> Result<Self, SignatureError> {
        let ea = explaining_away(obs)?;
        let (mv_magnitude, mv_flag) = markov_violation(obs, epsilon)?;
        let spearman_vs_reference = match reference_means {
            Some(reference) => {
                let means = obs
                    .complete_means()
                    .map_err(|_| SignatureError::MissingTask(first_missing(obs)))?;
                Some(spearman(&means, reference)?)
            }
            None => None,
        };
        let ci = bootstrap_ci(obs, bootstrap_b, level, seed)?;
        Ok(Self {
            ea,
            mv_magnitude,
            mv_flag,
            spearman_vs_reference,
            loocv_r2,
            ci,
        })
    }
}

fn first_missing(obs: &TaskObservations) -> TaskId {
    TaskId::ALL
        .into_iter()
        .find(|&t| obs.mean(t).is_none())
        .expect("called only when a task is missing")
}
