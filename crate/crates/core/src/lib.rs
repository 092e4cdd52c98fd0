//! Fitting leaky noisy-OR collider models to probability judgments and
//! scoring the reasoning signatures those judgments carry.
//!
//! The graph is the two-cause collider C1 → E ← C2 with parameters
//! θ = (b, m1, m2, pC): leak, per-cause strengths, and a prior shared by
//! both causes. [`inference`] answers exact conditional queries on it;
//! [`tasks`] fixes the eleven-task judgment battery (I–XI); [`estimator`]
//! fits θ to task means by least squares with AIC variant selection and
//! LOOCV consistency scoring; [`signatures`] computes judgment-level
//! diagnostics (explaining away, Markov violations, Spearman alignment,
//! bootstrap intervals); [`data`] and [`report`] handle the CSV and
//! canonical-JSON formats.

pub mod data;
pub mod estimator;
pub mod fsutil;
pub mod inference;
pub mod params;
pub mod report;
pub mod signatures;
pub mod tasks;

pub use data::{AgentGroup, DataError, Dataset, GroupKey, JudgmentRecord, PromptStyle};
pub use estimator::{
    fit, loocv_r2, select_by_aic, ConsistencyScore, EstimatorError, FitOptions, FitResult,
    TaskObservations, Variant,
};
pub use inference::{conditional, InferenceError, Node, NodeAssignment, QueryResult};
pub use params::{ColliderParams, ParamError};
pub use report::{AgentReport, CompareReport, Report, ReportError};
pub use signatures::{CiInterval, SignatureError, SignatureReport};
pub use tasks::{predict_all, task_definition, task_query, TaskDefinition, TaskId};
