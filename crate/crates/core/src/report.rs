//! Report assembly and canonical JSON persistence.
//!
//! Reports are written in a canonical form — keys sorted, every float fixed
//! to six significant digits, one trailing newline — so that re-saving a
//! loaded report reproduces the file byte for byte and diffs stay readable.
//! The rounding is applied when a report is constructed, not merely when it
//! is written; a report value in memory is always exactly what its file
//! says.

use crate::data::{GroupKey, PromptStyle};
use crate::estimator::{ConsistencyScore, FitResult, TaskObservations};
use crate::signatures::SignatureReport;
use crate::tasks::{task_definition, TaskId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};
use std::path::Path;
use thiserror::Error;

/// Per-task observed vs fitted summary inside an [`AgentReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: TaskId,
    /// The query in conventional notation, for human readers of the JSON.
    pub query: String,
    pub n: usize,
    pub mean: f64,
    pub prediction: f64,
}

/// Everything the pipeline produced for one (agent, style, domain) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent_id: String,
    pub prompt_style: PromptStyle,
    pub content_domain: String,
    pub n_records: usize,
    pub fit: FitResult,
    pub consistency: ConsistencyScore,
    pub signatures: SignatureReport,
    pub tasks: Vec<TaskReport>,
}

/// Per-task judgment difference inside a [`CompareReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDelta {
    pub task: TaskId,
    pub mean_a: f64,
    pub mean_b: f64,
    /// mean_a − mean_b.
    pub delta: f64,
}

/// Side-by-side comparison of two agent groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// Spearman ρ between the two agents' task-mean batteries.
    pub spearman: f64,
    pub agent_a: AgentReport,
    pub agent_b: AgentReport,
    pub per_task_delta: Vec<TaskDelta>,
}

/// Any document the CLI writes; the `kind` tag keeps files self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    Agents { groups: Vec<AgentReport> },
    Compare(CompareReport),
}

/// Persistence failures, with the path attached.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("report serialization failed: {0}")]
    Encode(#[from] serde_json::Error),
}

/// Rounds to six significant digits, the fixed report precision.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("fixed-precision float reparses")
}

fn canonicalize_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let rounded = round_sig6(n.as_f64().expect("is_f64 checked"));
            *v = Value::Number(
                Number::from_f64(rounded).expect("rounding preserves finiteness"),
            );
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize_value),
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = std::mem::take(map).into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            for (_, v) in entries.iter_mut() {
                canonicalize_value(v);
            }
            *map = entries.into_iter().collect();
        }
        _ => {}
    }
}

/// Canonical JSON text for any serializable value.
pub fn canonical_json(value: &impl Serialize) -> Result<String, serde_json::Error> {
    let mut v = serde_json::to_value(value)?;
    canonicalize_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

/// Re-encodes any serde-round-trippable value through the canonical float
/// grid, so the value held in memory equals the value its file will hold.
pub fn rounded<T: Serialize + DeserializeOwned>(value: &T) -> T {
    let mut v = serde_json::to_value(value).expect("report types always serialize");
    canonicalize_value(&mut v);
    serde_json::from_value(v).expect("canonicalization preserves structure")
}

impl AgentReport {
    /// Assembles and rounds the per-group report.
    pub fn new(
        key: &GroupKey,
        observations: &TaskObservations,
        fit: FitResult,
        consistency: ConsistencyScore,
        signatures: SignatureReport,
    ) -> Self {
        let tasks = TaskId::ALL
            .into_iter()
            .map(|task| TaskReport {
                task,
                query: task_definition(task).label(),
                n: observations.n_responses(task),
                mean: observations.mean(task).unwrap_or(f64::NAN),
                prediction: fit.predictions[task.index()],
            })
            .collect();
        rounded(&AgentReport {
            agent_id: key.agent_id.clone(),
            prompt_style: key.prompt_style,
            content_domain: key.content_domain.clone(),
            n_records: TaskId::ALL
                .into_iter()
                .map(|t| observations.n_responses(t))
                .sum(),
            fit,
            consistency,
            signatures,
            tasks,
        })
    }
}

impl CompareReport {
    /// Assembles and rounds the two-agent comparison.
    pub fn new(spearman: f64, agent_a: AgentReport, agent_b: AgentReport) -> Self {
        let per_task_delta = TaskId::ALL
            .into_iter()
            .map(|task| {
                let a = agent_a.tasks[task.index()].mean;
                let b = agent_b.tasks[task.index()].mean;
                TaskDelta {
                    task,
                    mean_a: a,
                    mean_b: b,
                    delta: a - b,
                }
            })
            .collect();
        rounded(&CompareReport {
            spearman,
            agent_a,
            agent_b,
            per_task_delta,
        })
    }
}

/// Writes a report as canonical JSON, atomically.
pub fn save_report(report: &Report, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let path = path.as_ref();
    let text = canonical_json(report)?;
    crate::fsutil::write_atomic(path, text.as_bytes()).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a report previously written by [`save_report`].
pub fn load_report(path: impl AsRef<Path>) -> Result<Report, ReportError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{fit, loocv_r2, FitOptions, Variant};
    use crate::params::ColliderParams;
    use crate::signatures;
    use crate::tasks::predict_all;

    #[test]
    fn rounding_fixes_six_significant_digits() {
        assert_eq!(round_sig6(0.123456789), 0.123457);
        assert_eq!(round_sig6(1234567.89), 1234570.0);
        assert_eq!(round_sig6(-0.000012345678), -1.23457e-5);
        assert_eq!(round_sig6(0.0), 0.0);
        assert_eq!(round_sig6(1.0), 1.0);
        // The canonical grid turns near-misses from float subtraction into
        // the exact constants reports are compared against.
        assert_eq!(round_sig6(0.57 - 0.48), 0.09);
    }

    #[test]
    fn canonical_json_sorts_keys_and_rounds() {
        #[derive(Serialize)]
        struct Scrambled {
            zebra: f64,
            alpha: f64,
            middle: Vec<f64>,
        }
        let text = canonical_json(&Scrambled {
            zebra: 0.1234567890123,
            alpha: 1.0,
            middle: vec![0.987654321],
        })
        .unwrap();
        let alpha_at = text.find("\"alpha\"").unwrap();
        let middle_at = text.find("\"middle\"").unwrap();
        let zebra_at = text.find("\"zebra\"").unwrap();
        assert!(alpha_at < middle_at && middle_at < zebra_at);
        assert!(text.contains("0.123457"));
        assert!(text.contains("0.987654"));
        assert!(text.ends_with('\n'));
    }

    fn sample_report() -> Report {
        let truth = ColliderParams::new(0.2, 0.8, 0.6, 0.5).unwrap();
        let obs = TaskObservations::from_means(predict_all(&truth).unwrap()).unwrap();
        let opts = FitOptions::default();
        let fitted = fit(&obs, Variant::Asymmetric, &opts).unwrap();
        let consistency = loocv_r2(&obs, Variant::Asymmetric, &opts).unwrap();
        let sigs = SignatureReport::compute(
            &obs,
            signatures::DEFAULT_EPSILON,
            100,
            signatures::DEFAULT_LEVEL,
            0,
            consistency.loocv_r2,
            None,
        )
        .unwrap();
        let key = GroupKey {
            agent_id: "synthetic".to_string(),
            prompt_style: PromptStyle::Direct,
            content_domain: "none".to_string(),
        };
        Report::Agents {
            groups: vec![AgentReport::new(&key, &obs, fitted, consistency, sigs)],
        }
    }

    #[test]
    fn save_load_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = sample_report();
        save_report(&report, &path).unwrap();
        let loaded = load_report(&path).unwrap();
        assert_eq!(report, loaded);

        // Saving what was loaded must not change a byte.
        let first = std::fs::read(&path).unwrap();
        save_report(&loaded, &path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn reports_are_constructed_on_the_canonical_grid() {
        if let Report::Agents { groups } = sample_report() {
            let g = &groups[0];
            for t in &g.tasks {
                assert_eq!(t.mean, round_sig6(t.mean));
                assert_eq!(t.prediction, round_sig6(t.prediction));
            }
            assert_eq!(g.fit.rss, round_sig6(g.fit.rss));
            assert_eq!(
                g.consistency.loocv_r2,
                round_sig6(g.consistency.loocv_r2)
            );
        } else {
            unreachable!();
        }
    }

    #[test]
    fn kind_tag_distinguishes_report_files() {
        let report = sample_report();
        let text = canonical_json(&report).unwrap();
        assert!(text.contains("\"kind\": \"agents\""));
        let back: Report = serde_json::from_str(&text).unwrap();
        assert!(matches!(back, Report::Agents { .. }));
    }
}
