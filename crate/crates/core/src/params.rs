//! Parameter vector of the leaky noisy-OR collider model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parameters θ = (b, m1, m2, pC) of the leaky noisy-OR collider.
///
/// `b` is the leak (probability the effect occurs with no modeled cause
/// present), `m1`/`m2` are the causal strengths of the two causes, and
/// `p_c` is the prior shared by both causes. All four live in [0, 1];
/// construction enforces the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ColliderParams {
    b: f64,
    m1: f64,
    m2: f64,
    p_c: f64,
}

#[derive(Deserialize)]
struct RawParams {
    b: f64,
    m1: f64,
    m2: f64,
    p_c: f64,
}

impl TryFrom<RawParams> for ColliderParams {
    type Error = ParamError;

    fn try_from(raw: RawParams) -> Result<Self, ParamError> {
        ColliderParams::new(raw.b, raw.m1, raw.m2, raw.p_c)
    }
}

/// Rejected parameter vector.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("parameter {name} = {value} lies outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

impl ColliderParams {
    /// Validates every component against [0, 1]. NaN is rejected.
    pub fn new(b: f64, m1: f64, m2: f64, p_c: f64) -> Result<Self, ParamError> {
        for (name, value) in [("b", b), ("m1", m1), ("m2", m2), ("p_c", p_c)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::OutOfRange { name, value });
            }
        }
        Ok(Self { b, m1, m2, p_c })
    }

    /// Symmetric parameterization with a single causal strength m1 = m2 = m.
    pub fn symmetric(b: f64, m: f64, p_c: f64) -> Result<Self, ParamError> {
        Self::new(b, m, m, p_c)
    }

    pub fn leak(&self) -> f64 {
        self.b
    }

    pub fn strength_c1(&self) -> f64 {
        self.m1
    }

    pub fn strength_c2(&self) -> f64 {
        self.m2
    }

    pub fn prior(&self) -> f64 {
        self.p_c
    }

    /// True when both causal strengths are exactly equal.
    pub fn is_symmetric(&self) -> bool {
        self.m1 == self.m2
    }

    /// Relabels the causes (m1 and m2 swap). The collider is symmetric under
    /// this relabeling, which is how datasets querying the second cause are
    /// normalized to the canonical first-cause battery.
    pub fn swap_causes(&self) -> Self {
        Self {
            b: self.b,
            m1: self.m2,
            m2: self.m1,
            p_c: self.p_c,
        }
    }
}
