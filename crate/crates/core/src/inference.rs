//! Exact inference on the two-cause collider C1 -> E <- C2.
//!
//! The joint has eight states, so every query is answered by enumeration.
//! The one refinement over literal enumeration is barren-node pruning: when
//! the effect is neither observed nor queried it is summed out symbolically,
//! which keeps the causes' marginal independence exact in floating point
//! instead of approximate after a multiply-then-divide round trip.

use crate::params::ColliderParams;
use thiserror::Error;

/// A variable of the collider graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    C1,
    C2,
    E,
}

/// An observed value for one node.
pub type NodeAssignment = (Node, bool);

/// Outcome of a conditional query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryResult {
    /// Pr(target = 1 | evidence), clamped to [0, 1].
    pub probability: f64,
    /// Pr(evidence) under the model; 1.0 for an empty evidence set.
    pub evidence_probability: f64,
}

/// A query that cannot be answered.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum InferenceError {
    #[error("target {0:?} is already fixed by the evidence")]
    TargetObserved(Node),
    #[error("conditioning on impossible evidence (probability zero under the model)")]
    ImpossibleEvidence,
}

/// Pr(E = 0 | c1, c2): the product of independent failure terms.
fn effect_absent(params: &ColliderParams, c1: bool, c2: bool) -> f64 {
    let mut q = 1.0 - params.leak();
    if c1 {
        q *= 1.0 - params.strength_c1();
    }
    if c2 {
        q *= 1.0 - params.strength_c2();
    }
    q
}

/// The noisy-OR CPD Pr(E = 1 | c1, c2) = 1 - (1-b)(1-m1)^c1 (1-m2)^c2.
pub fn effect_cpd(params: &ColliderParams, c1: bool, c2: bool) -> f64 {
    1.0 - effect_absent(params, c1, c2)
}

fn cause_prior(params: &ColliderParams, value: bool) -> f64 {
    if value {
        params.prior()
    } else {
        1.0 - params.prior()
    }
}

/// Pr(C1 = c1, C2 = c2, E = e) for one fully specified state.
pub fn joint_probability(params: &ColliderParams, c1: bool, c2: bool, e: bool) -> f64 {
    let effect_term = if e {
        effect_cpd(params, c1, c2)
    } else {
        effect_absent(params, c1, c2)
    };
    cause_prior(params, c1) * cause_prior(params, c2) * effect_term
}

fn state_matches(evidence: &[NodeAssignment], c1: bool, c2: bool, e: bool) -> bool {
    evidence.iter().all(|&(node, value)| match node {
        Node::C1 => c1 == value,
        Node::C2 => c2 == value,
        Node::E => e == value,
    })
}

/// Pr(target = 1 | evidence) by exact enumeration.
///
/// Conflicting evidence on a single node has probability zero and reports
/// `ImpossibleEvidence`, same as any other zero-mass conditioning event.
pub fn conditional(
    params: &ColliderParams,
    target: Node,
    evidence: &[NodeAssignment],
) -> Result<QueryResult, InferenceError> {
    if evidence.iter().any(|&(node, _)| node == target) {
        return Err(InferenceError::TargetObserved(target));
    }

    // Barren effect: unobserved, not queried. Summing it out of the CPD gives
    // exactly 1, so the causes keep their priors and no division happens.
    let effect_involved = target == Node::E || evidence.iter().any(|&(n, _)| n == Node::E);
    if !effect_involved {
        let mut evidence_probability = 1.0;
        for &(_, value) in evidence {
            evidence_probability *= cause_prior(params, value);
        }
        if evidence_probability == 0.0 {
            return Err(InferenceError::ImpossibleEvidence);
        }
        // Only cause nodes remain and they are marginally independent, so the
        // target's posterior is its prior, bit for bit.
        return Ok(QueryResult {
            probability: params.prior(),
            evidence_probability,
        });
    }

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for bits in 0u8..8 {
        let c1 = bits & 1 != 0;
        let c2 = bits & 2 != 0;
        let e = bits & 4 != 0;
        if !state_matches(evidence, c1, c2, e) {
            continue;
        }
        let mass = joint_probability(params, c1, c2, e);
        denominator += mass;
        let target_on = match target {
            Node::C1 => c1,
            Node::C2 => c2,
            Node::E => e,
        };
        if target_on {
            numerator += mass;
        }
    }

    if denominator == 0.0 {
        return Err(InferenceError::ImpossibleEvidence);
    }
    Ok(QueryResult {
        probability: (numerator / denominator).clamp(0.0, 1.0),
        evidence_probability: denominator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn theta() -> ColliderParams {
        ColliderParams::new(0.2, 0.8, 0.6, 0.5).unwrap()
    }

    #[test]
    fn cpd_matches_hand_computation() {
        let p = theta();
        assert_relative_eq!(effect_cpd(&p, true, true), 0.936, max_relative = 1e-15);
        assert_relative_eq!(effect_cpd(&p, true, false), 0.84, max_relative = 1e-15);
        assert_relative_eq!(effect_cpd(&p, false, true), 0.68, max_relative = 1e-15);
        assert_relative_eq!(effect_cpd(&p, false, false), 0.2, max_relative = 1e-15);
    }

    #[test]
    fn joint_matches_hand_computation_and_normalizes() {
        let p = theta();
        assert_relative_eq!(
            joint_probability(&p, true, false, true),
            0.21,
            max_relative = 1e-15
        );

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = ColliderParams::new(
                rng.gen_range(0.0..=1.0),
                rng.gen_range(0.0..=1.0),
                rng.gen_range(0.0..=1.0),
                rng.gen_range(0.0..=1.0),
            )
            .unwrap();
            let total: f64 = (0u8..8)
                .map(|bits| {
                    joint_probability(&p, bits & 1 != 0, bits & 2 != 0, bits & 4 != 0)
                })
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagnostic_posteriors_match_hand_computation() {
        let p = theta();
        let with_c2 = conditional(&p, Node::C1, &[(Node::E, true), (Node::C2, true)]).unwrap();
        let without_c2 =
            conditional(&p, Node::C1, &[(Node::E, true), (Node::C2, false)]).unwrap();
        // 0.936 / (0.936 + 0.68) and 0.84 / (0.84 + 0.2).
        assert_relative_eq!(with_c2.probability, 0.936 / 1.616, max_relative = 1e-14);
        assert_relative_eq!(without_c2.probability, 0.84 / 1.04, max_relative = 1e-14);
        assert!(without_c2.probability > with_c2.probability);
    }

    #[test]
    fn barren_effect_returns_prior_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let p = ColliderParams::new(
                rng.gen_range(0.0..=1.0),
                rng.gen_range(0.0..=1.0),
                rng.gen_range(0.0..=1.0),
                rng.gen_range(0.001..=0.999),
            )
            .unwrap();
            for evidence in [
                vec![],
                vec![(Node::C2, true)],
                vec![(Node::C2, false)],
            ] {
                let r = conditional(&p, Node::C1, &evidence).unwrap();
                // Bit-exact, not just close: nothing downstream of the causes
                // was touched, so nothing may perturb the prior.
                assert_eq!(r.probability, p.prior());
            }
        }
    }

    #[test]
    fn evidence_probability_is_reported() {
        let p = theta();
        let r = conditional(&p, Node::C1, &[(Node::E, true), (Node::C2, false)]).unwrap();
        // Pr(E=1, C2=0) = 0.5*0.5*0.84 + 0.5*0.5*0.2 = 0.26.
        assert_relative_eq!(r.evidence_probability, 0.26, max_relative = 1e-14);

        let empty = conditional(&p, Node::E, &[]).unwrap();
        assert_eq!(empty.evidence_probability, 1.0);
    }

    #[test]
    fn target_observed_is_an_error() {
        let p = theta();
        let err = conditional(&p, Node::C1, &[(Node::C1, true)]).unwrap_err();
        assert_eq!(err, InferenceError::TargetObserved(Node::C1));
    }

    #[test]
    fn impossible_evidence_is_an_error() {
        let silent = ColliderParams::new(0.0, 0.0, 0.0, 0.5).unwrap();
        let err = conditional(&silent, Node::C1, &[(Node::E, true)]).unwrap_err();
        assert_eq!(err, InferenceError::ImpossibleEvidence);

        let no_causes = ColliderParams::new(0.3, 0.5, 0.5, 0.0).unwrap();
        let err = conditional(&no_causes, Node::E, &[(Node::C1, true)]).unwrap_err();
        assert_eq!(err, InferenceError::ImpossibleEvidence);

        // Contradictory duplicate evidence is just a zero-mass event.
        let p = theta();
        let err =
            conditional(&p, Node::C1, &[(Node::E, true), (Node::E, false)]).unwrap_err();
        assert_eq!(err, InferenceError::ImpossibleEvidence);
    }
}
