//! The eleven-task judgment battery over the collider.
//!
//! Tasks are identified by roman numerals I through XI and are always stated
//! with C1 as the queried cause; datasets probing the second cause are
//! relabeled onto this battery before they reach the estimator. Tasks I-III
//! are predictive (effect given causes), IV-V are the cause marginals that
//! any collider keeps independent, and VI-XI are diagnostic posteriors under
//! present or absent effect.

use crate::inference::{conditional, InferenceError, Node, NodeAssignment};
use crate::params::ColliderParams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// One of the eleven battery tasks. Variant names are the roman numerals
/// used everywhere the task appears in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum TaskId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
    X,
    XI,
}

impl TaskId {
    /// Battery order, which is also serialization and report order.
    pub const ALL: [TaskId; 11] = [
        TaskId::I,
        TaskId::II,
        TaskId::III,
        TaskId::IV,
        TaskId::V,
        TaskId::VI,
        TaskId::VII,
        TaskId::VIII,
        TaskId::IX,
        TaskId::X,
        TaskId::XI,
    ];

    /// Zero-based position in [`TaskId::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    fn as_str(self) -> &'static str {
        ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI"][self.index()]
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An unrecognized task label.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("unknown task id {0:?} (expected a roman numeral I..XI)")]
pub struct ParseTaskIdError(pub String);

impl FromStr for TaskId {
    type Err = ParseTaskIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        TaskId::ALL
            .into_iter()
            .find(|id| id.as_str() == upper)
            .ok_or_else(|| ParseTaskIdError(s.to_string()))
    }
}

/// The probabilistic query a task asks the reasoner to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskDefinition {
    pub id: TaskId,
    pub target: Node,
    pub evidence: &'static [NodeAssignment],
}

impl TaskDefinition {
    /// Query in conventional notation, e.g. `Pr(C1=1 | E=1, C2=0)`.
    pub fn label(&self) -> String {
        let name = |node: Node| match node {
            Node::C1 => "C1",
            Node::C2 => "C2",
            Node::E => "E",
        };
        let mut s = format!("Pr({}=1", name(self.target));
        if !self.evidence.is_empty() {
            s.push_str(" | ");
            let parts: Vec<String> = self
                .evidence
                .iter()
                .map(|&(node, value)| format!("{}={}", name(node), u8::from(value)))
                .collect();
            s.push_str(&parts.join(", "));
        }
        s.push(')');
        s
    }
}

/// The full battery, indexed like [`TaskId::ALL`].
pub fn task_definition(id: TaskId) -> TaskDefinition {
    use Node::{C1, C2, E};
    let (target, evidence): (Node, &'static [NodeAssignment]) = match id {
        TaskId::I => (E, &[(C1, true), (C2, true)]),
        TaskId::II => (E, &[(C1, true)]),
        TaskId::III => (E, &[(C1, true), (C2, false)]),
        TaskId::IV => (C1, &[(C2, true)]),
        TaskId::V => (C1, &[(C2, false)]),
        TaskId::VI => (C1, &[(E, true), (C2, true)]),
        TaskId::VII => (C1, &[(E, true)]),
        TaskId::VIII => (C1, &[(E, true), (C2, false)]),
        TaskId::IX => (C1, &[(E, false), (C2, true)]),
        TaskId::X => (C1, &[(E, false)]),
        TaskId::XI => (C1, &[(E, false), (C2, false)]),
    };
    TaskDefinition { id, target, evidence }
}

/// Model answer to a single task.
pub fn task_query(params: &ColliderParams, id: TaskId) -> Result<f64, InferenceError> {
    let def = task_definition(id);
    conditional(params, def.target, def.evidence).map(|r| r.probability)
}

/// Model answers to the whole battery, in [`TaskId::ALL`] order.
pub fn predict_all(params: &ColliderParams) -> Result<[f64; 11], InferenceError> {
    let mut out = [0.0; 11];
    for id in TaskId::ALL {
        out[id.index()] = task_query(params, id)?;
    }
    Ok(out)
}
