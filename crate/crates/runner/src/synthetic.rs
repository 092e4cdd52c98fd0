//! Synthetic agents: model predictions plus response noise.
//!
//! A synthetic agent answers every task with its collider model's
//! prediction, perturbed by Gaussian noise on the probability scale and
//! clamped to the response range. Useful both as a pipeline smoke test
//! (zero noise must round-trip through the estimator) and as ground truth
//! for recovery studies.

use collider_core::data::{Dataset, JudgmentRecord, PromptStyle};
use collider_core::inference::InferenceError;
use collider_core::params::ColliderParams;
use collider_core::tasks::{predict_all, TaskId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// A simulated respondent with known ground-truth parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAgent {
    pub agent_id: String,
    pub params: ColliderParams,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("noise sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

impl SyntheticAgent {
    pub fn new(
        agent_id: impl Into<String>,
        params: ColliderParams,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self, SyntheticError> {
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(SyntheticError::InvalidSigma(noise_sigma));
        }
        Ok(Self {
            agent_id: agent_id.into(),
            params,
            noise_sigma,
            seed,
        })
    }
}

/// Generates `repeats` responses per task, task-major and trial-minor, so
/// the draw sequence is a stable function of the seed alone.
pub fn simulate_agent(agent: &SyntheticAgent, repeats: u32) -> Result<Dataset, SyntheticError> {
    if repeats == 0 {
        return Err(SyntheticError::ZeroRepeats);
    }
    let predictions = predict_all(&agent.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(agent.seed);
    // Normal::new only fails on a non-finite or negative sigma, which the
    // constructor already rejected.
    let noise = Normal::new(0.0, agent.noise_sigma).expect("sigma validated");

    let mut records = Vec::with_capacity(11 * repeats as usize);
    for task in TaskId::ALL {
        let pred = predictions[task.index()];
        for trial in 0..repeats {
            let response = 100.0 * (pred + noise.sample(&mut rng)).clamp(0.0, 1.0);
            records.push(JudgmentRecord {
                agent_id: agent.agent_id.clone(),
                prompt_style: PromptStyle::Direct,
                content_domain: "synthetic".to_string(),
                task_id: task,
                response,
                trial_index: trial,
                timestamp: None,
            });
        }
    }
    Ok(Dataset::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use collider_core::estimator::{fit, FitOptions, TaskObservations, Variant};

    fn agent(sigma: f64, seed: u64) -> SyntheticAgent {
        let params = ColliderParams::new(0.2, 0.8, 0.6, 0.5).unwrap();
        SyntheticAgent::new("synth", params, sigma, seed).unwrap()
    }

    #[test]
    fn zero_noise_reproduces_the_model_exactly() {
        let data = simulate_agent(&agent(0.0, 7), 3).unwrap();
        assert_eq!(data.len(), 33);
        // Pr(C1=1 | E=1, C2=0) = 0.42/0.52 ≈ 0.80769 for these parameters.
        let viii: Vec<f64> = data
            .records
            .iter()
            .filter(|r| r.task_id == TaskId::VIII)
            .map(|r| r.response)
            .collect();
        assert_eq!(viii.len(), 3);
        for v in viii {
            assert_relative_eq!(v, 100.0 * 0.42 / 0.52, epsilon = 1e-12);
            assert!((v - 80.769).abs() < 1e-3);
        }
    }

    #[test]
    fn same_seed_means_same_dataset() {
        let a = simulate_agent(&agent(0.08, 99), 5).unwrap();
        let b = simulate_agent(&agent(0.08, 99), 5).unwrap();
        assert_eq!(a, b);
        let c = simulate_agent(&agent(0.08, 100), 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn records_are_task_major_and_trial_minor() {
        let data = simulate_agent(&agent(0.05, 1), 2).unwrap();
        let order: Vec<(TaskId, u32)> = data
            .records
            .iter()
            .map(|r| (r.task_id, r.trial_index))
            .collect();
        let expected: Vec<(TaskId, u32)> = TaskId::ALL
            .into_iter()
            .flat_map(|t| (0..2).map(move |i| (t, i)))
            .collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn noiseless_data_recovers_the_generator() {
        let truth = ColliderParams::new(0.15, 0.9, 0.6, 0.4).unwrap();
        let a = SyntheticAgent::new("gen", truth, 0.0, 0).unwrap();
        let data = simulate_agent(&a, 4).unwrap();
        let group = &data.groups()[0];
        let obs = TaskObservations::from_pairs(group.normalized_judgments()).unwrap();
        let fitted = fit(&obs, Variant::Asymmetric, &FitOptions::default()).unwrap();
        assert!(fitted.rss <= 1e-6, "rss = {}", fitted.rss);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let params = ColliderParams::new(0.1, 0.8, 0.8, 0.5).unwrap();
        assert!(matches!(
            SyntheticAgent::new("a", params, -0.1, 0),
            Err(SyntheticError::InvalidSigma(_))
        ));
        assert!(matches!(
            SyntheticAgent::new("a", params, f64::NAN, 0),
            Err(SyntheticError::InvalidSigma(_))
        ));
        assert!(matches!(
            simulate_agent(&agent(0.1, 0), 0),
            Err(SyntheticError::ZeroRepeats)
        ));
    }
}
