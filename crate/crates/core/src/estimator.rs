//! Least-squares fitting of collider parameters to task-mean judgments,
//! AIC variant selection, and leave-one-task-out consistency.
//!
//! The objective is Σ_i (prediction_i(θ) − mean_i)² over the eleven task
//! means, minimized over the box [0,1]^k with k = 3 (symmetric, m1 = m2) or
//! k = 4. The optimizer is deterministic multi-start: every point of a
//! step-0.1 lattice is scored, the best few plus a handful of seeded random
//! points are refined by coordinate-wise golden-section sweeps, and the best
//! refined point wins. Parameter vectors whose battery contains an
//! impossible-evidence query score +∞ and drop out on their own.

use crate::inference::InferenceError;
use crate::params::ColliderParams;
use crate::tasks::{predict_all, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Per-task response lists on the normalized [0,1] scale.
///
/// Fitting consumes the per-task means; the raw lists are kept because the
/// bootstrap resamples them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskObservations {
    responses: [Vec<f64>; 11],
}

/// Which causal-strength parameterization is being fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Symmetric,
    Asymmetric,
}

impl Variant {
    /// Number of free parameters: (b, m, pC) or (b, m1, m2, pC).
    pub fn param_count(self) -> usize {
        match self {
            Variant::Symmetric => 3,
            Variant::Asymmetric => 4,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Symmetric => "symmetric",
            Variant::Asymmetric => "asymmetric",
        })
    }
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub variant: Variant,
    pub params: ColliderParams,
    /// Sum of squared residuals over the eleven task means.
    pub rss: f64,
    pub aic: f64,
    /// Model battery answers at the fitted θ, in task order.
    pub predictions: [f64; 11],
}

/// Held-out predictive consistency from leave-one-task-out refits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScore {
    pub loocv_r2: f64,
    pub per_task_heldout_prediction: [f64; 11],
}

/// Multi-start configuration. The defaults reproduce every number in the
/// test suite; `seed` is the only field most callers touch.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub seed: u64,
    /// How many of the best lattice points are refined.
    pub lattice_starts: usize,
    /// Additional uniform random starts drawn from the seed.
    pub random_starts: usize,
    /// Hard cap on coordinate sweeps per start.
    pub max_sweeps: usize,
    /// A sweep that improves the objective by less than this ends refinement.
    pub sweep_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            lattice_starts: 8,
            random_starts: 4,
            max_sweeps: 200,
            sweep_tol: 1e-10,
        }
    }
}

/// What kept the estimator from running.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EstimatorError {
    #[error("task {0} has no responses; the fit needs all eleven tasks")]
    MissingTask(TaskId),
    #[error("task {task}: normalized response {value} lies outside [0, 1]")]
    ResponseOutOfRange { task: TaskId, value: f64 },
    #[error("degenerate variance: all eleven task means are identical")]
    DegenerateVariance,
}

impl TaskObservations {
    /// Collects (task, normalized response) pairs; responses must be in [0,1].
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (TaskId, f64)>,
    ) -> Result<Self, EstimatorError> {
        let mut obs = Self::default();
        for (task, value) in pairs {
            obs.push(task, value)?;
        }
        Ok(obs)
    }

    /// One pseudo-response per task; handy for synthetic batteries.
    pub fn from_means(means: [f64; 11]) -> Result<Self, EstimatorError> {
        Self::from_pairs(TaskId::ALL.into_iter().zip(means))
    }

    pub fn push(&mut self, task: TaskId, value: f64) -> Result<(), EstimatorError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(EstimatorError::ResponseOutOfRange { task, value });
        }
        self.responses[task.index()].push(value);
        Ok(())
    }

    pub fn responses(&self, task: TaskId) -> &[f64] {
        &self.responses[task.index()]
    }

    pub fn n_responses(&self, task: TaskId) -> usize {
        self.responses[task.index()].len()
    }

    /// Mean judgment for one task, if observed at all.
    pub fn mean(&self, task: TaskId) -> Option<f64> {
        let rs = &self.responses[task.index()];
        if rs.is_empty() {
            None
        } else {
            Some(rs.iter().sum::<f64>() / rs.len() as f64)
        }
    }

    pub fn means(&self) -> [Option<f64>; 11] {
        TaskId::ALL.map(|t| self.mean(t))
    }

    /// All eleven means, or the first missing task.
    pub fn complete_means(&self) -> Result<[f64; 11], EstimatorError> {
        let mut out = [0.0; 11];
        for t in TaskId::ALL {
            out[t.index()] = self.mean(t).ok_or(EstimatorError::MissingTask(t))?;
        }
        Ok(out)
    }

    pub fn is_complete(&self) -> bool {
        self.responses.iter().all(|r| !r.is_empty())
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
/// Bracket width at which a golden-section line search stops.
const LINE_TOL: f64 = 1e-10;
/// Floor under RSS/n before the AIC logarithm, per the Gaussian form.
const RSS_FLOOR: f64 = 1e-12;

fn params_from(variant: Variant, x: &[f64]) -> ColliderParams {
    let c = |v: f64| v.clamp(0.0, 1.0);
    let built = match variant {
        Variant::Symmetric => ColliderParams::symmetric(c(x[0]), c(x[1]), c(x[2])),
        Variant::Asymmetric => ColliderParams::new(c(x[0]), c(x[1]), c(x[2]), c(x[3])),
    };
    built.expect("clamped coordinates are always inside the box")
}

/// Squared-error objective against the unmasked means; +∞ when the battery
/// is not computable at θ.
fn objective(variant: Variant, x: &[f64], means: &[Option<f64>; 11]) -> f64 {
    let params = params_from(variant, x);
    match predict_all(&params) {
        Ok(preds) => {
            let mut rss = 0.0;
            for (pred, mean) in preds.iter().zip(means) {
                if let Some(y) = mean {
                    let r = pred - y;
                    rss += r * r;
                }
            }
            rss
        }
        Err(InferenceError::ImpossibleEvidence | InferenceError::TargetObserved(_)) => {
            f64::INFINITY
        }
    }
}

/// Golden-section minimum of `g` over [0, 1]; returns the midpoint of the
/// final bracket and its value.
fn golden_min(mut g: impl FnMut(f64) -> f64) -> (f64, f64) {
    let (mut a, mut d) = (0.0_f64, 1.0_f64);
    let mut b = d - INV_PHI * (d - a);
    let mut c = a + INV_PHI * (d - a);
    let mut fb = g(b);
    let mut fc = g(c);
    while d - a > LINE_TOL {
        if fb <= fc {
            d = c;
            c = b;
            fc = fb;
            b = d - INV_PHI * (d - a);
            fb = g(b);
        } else {
            a = b;
            b = c;
            fb = fc;
            c = a + INV_PHI * (d - a);
            fc = g(c);
        }
    }
    let x = 0.5 * (a + d);
    (x, g(x))
}

/// Coordinate-descent refinement of one start. Each coordinate is line
/// searched over the whole [0,1] interval; a move is taken only when it
/// strictly improves, so the objective value never increases.
fn refine(
    variant: Variant,
    start: Vec<f64>,
    means: &[Option<f64>; 11],
    opts: &FitOptions,
) -> (Vec<f64>, f64) {
    let k = variant.param_count();
    let mut x = start;
    let mut fx = objective(variant, &x, means);
    for _ in 0..opts.max_sweeps {
        let before = fx;
        for d in 0..k {
            let (cand, fcand) = golden_min(|v| {
                let mut probe = x.clone();
                probe[d] = v;
                objective(variant, &probe, means)
            });
            if fcand < fx {
                x[d] = cand;
                fx = fcand;
            }
        }
        if before - fx < opts.sweep_tol {
            break;
        }
    }
    (x, fx)
}

/// Full multi-start minimization. `extra_starts` lets a caller inject known
/// good points (the asymmetric fit seeds itself with the symmetric optimum
/// so the nested-model RSS ordering holds by construction).
fn optimize(
    variant: Variant,
    means: &[Option<f64>; 11],
    opts: &FitOptions,
    extra_starts: &[Vec<f64>],
) -> (ColliderParams, f64) {
    let k = variant.param_count();

    // Score the whole step-0.1 lattice and keep the best few as starts.
    let lattice_points = 11usize.pow(k as u32);
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(lattice_points);
    for mut idx in 0..lattice_points {
        let mut x = vec![0.0; k];
        for coord in x.iter_mut() {
            *coord = (idx % 11) as f64 / 10.0;
            idx /= 11;
        }
        scored.push((objective(variant, &x, means), x));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(opts.lattice_starts);

    let mut starts: Vec<Vec<f64>> = scored.into_iter().map(|(_, x)| x).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..k).map(|_| rng.gen_range(0.0..=1.0)).collect());
    }
    starts.extend_from_slice(extra_starts);

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let (x, fx) = refine(variant, start, means, opts);
        let better = match &best {
            None => true,
            Some((_, fbest)) => fx < *fbest,
        };
        if better {
            best = Some((x, fx));
        }
    }
    let (x, fx) = best.expect("at least one start is always provided");
    (params_from(variant, &x), fx)
}

fn aic(rss: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    n * (rss / n).max(RSS_FLOOR).ln() + 2.0 * k as f64
}

fn embed(params: ColliderParams) -> Vec<f64> {
    vec![
        params.leak(),
        params.strength_c1(),
        params.strength_c2(),
        params.prior(),
    ]
}

fn fit_means(
    means: &[Option<f64>; 11],
    variant: Variant,
    opts: &FitOptions,
) -> (ColliderParams, f64) {
    match variant {
        Variant::Symmetric => optimize(variant, means, opts, &[]),
        Variant::Asymmetric => {
            // Seed with the symmetric optimum so RSS(asym) ≤ RSS(sym) always.
            let (sym, _) = optimize(Variant::Symmetric, means, opts, &[]);
            optimize(variant, means, opts, &[embed(sym)])
        }
    }
}

fn package(variant: Variant, params: ColliderParams, rss: f64) -> FitResult {
    let predictions =
        predict_all(&params).expect("a finite objective implies a computable battery");
    FitResult {
        variant,
        params,
        rss,
        aic: aic(rss, 11, variant.param_count()),
        predictions,
    }
}

/// Least-squares fit of one variant to all eleven task means.
pub fn fit(
    observations: &TaskObservations,
    variant: Variant,
    opts: &FitOptions,
) -> Result<FitResult, EstimatorError> {
    let means = observations.complete_means()?.map(Some);
    let (params, rss) = fit_means(&means, variant, opts);
    Ok(package(variant, params, rss))
}

/// Fits both variants and returns the lower-AIC one; ties go to the
/// symmetric (fewer-parameter) model.
pub fn select_by_aic(
    observations: &TaskObservations,
    opts: &FitOptions,
) -> Result<FitResult, EstimatorError> {
    let means = observations.complete_means()?.map(Some);
    let (sym_params, sym_rss) = optimize(Variant::Symmetric, &means, opts, &[]);
    let (asym_params, asym_rss) =
        optimize(Variant::Asymmetric, &means, opts, &[embed(sym_params)]);

    let sym = package(Variant::Symmetric, sym_params, sym_rss);
    let asym = package(Variant::Asymmetric, asym_params, asym_rss);
    Ok(if sym.aic <= asym.aic { sym } else { asym })
}

/// Leave-one-task-out R² with the variant held fixed across folds.
pub fn loocv_r2(
    observations: &TaskObservations,
    variant: Variant,
    opts: &FitOptions,
) -> Result<ConsistencyScore, EstimatorError> {
    let means = observations.complete_means()?;
    let grand = means.iter().sum::<f64>() / 11.0;
    let ss_tot: f64 = means.iter().map(|y| (y - grand) * (y - grand)).sum();
    if ss_tot == 0.0 {
        return Err(EstimatorError::DegenerateVariance);
    }

    let mut heldout = [0.0; 11];
    let mut ss_res = 0.0;
    for i in 0..11 {
        let mut masked = means.map(Some);
        masked[i] = None;
        let (params, _) = fit_means(&masked, variant, opts);
        let pred = predict_all(&params)
            .expect("a finite objective implies a computable battery")[i];
        heldout[i] = pred;
        let r = means[i] - pred;
        ss_res += r * r;
    }

    Ok(ConsistencyScore {
        loocv_r2: 1.0 - ss_res / ss_tot,
        per_task_heldout_prediction: heldout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn noiseless(params: &ColliderParams) -> TaskObservations {
        TaskObservations::from_means(predict_all(params).unwrap()).unwrap()
    }

    #[test]
    fn observations_validate_and_average() {
        let mut obs = TaskObservations::default();
        obs.push(TaskId::VI, 0.4).unwrap();
        obs.push(TaskId::VI, 0.6).unwrap();
        assert_eq!(obs.mean(TaskId::VI), Some(0.5));
        assert_eq!(obs.mean(TaskId::I), None);
        assert_eq!(obs.n_responses(TaskId::VI), 2);
        assert!(!obs.is_complete());
        assert!(matches!(
            obs.complete_means(),
            Err(EstimatorError::MissingTask(TaskId::I))
        ));
        assert!(matches!(
            obs.push(TaskId::I, 1.2),
            Err(EstimatorError::ResponseOutOfRange { .. })
        ));
    }

    #[test]
    fn asymmetric_fit_recovers_noiseless_battery() {
        let truth = ColliderParams::new(0.1, 0.9, 0.7, 0.4).unwrap();
        let obs = noiseless(&truth);
        let fitted = fit(&obs, Variant::Asymmetric, &FitOptions::default()).unwrap();
        assert!(fitted.rss <= 1e-6, "rss = {}", fitted.rss);
        for (pred, target) in fitted.predictions.iter().zip(obs.complete_means().unwrap()) {
            assert_relative_eq!(pred, &target, epsilon = 1e-3);
        }
    }

    #[test]
    fn symmetric_fit_recovers_shared_strength() {
        let truth = ColliderParams::symmetric(0.1, 0.8, 0.5).unwrap();
        let obs = noiseless(&truth);
        let fitted = fit(&obs, Variant::Symmetric, &FitOptions::default()).unwrap();
        assert_eq!(fitted.params.strength_c1(), fitted.params.strength_c2());
        assert_relative_eq!(fitted.params.strength_c1(), 0.8, epsilon = 1e-3);
    }

    #[test]
    fn flat_judgments_are_fit_by_an_inert_cause_model() {
        let obs = TaskObservations::from_means([0.5; 11]).unwrap();
        let fitted = fit(&obs, Variant::Symmetric, &FitOptions::default()).unwrap();
        assert!(fitted.rss <= 1e-6, "rss = {}", fitted.rss);
    }

    #[test]
    fn aic_is_monotone_in_rss_for_fixed_k() {
        assert!(aic(0.02, 11, 3) < aic(0.03, 11, 3));
        assert!(aic(0.0, 11, 3).is_finite()); // the floor guards ln(0)
        assert_eq!(aic(0.0, 11, 3), aic(1e-15, 11, 3));
    }

    #[test]
    fn selection_prefers_symmetric_on_symmetric_data() {
        // Noiseless symmetric data: both variants reach RSS ≈ 0, so the
        // floored log terms tie and the 2k penalty decides.
        let truth = ColliderParams::symmetric(0.2, 0.7, 0.5).unwrap();
        let best = select_by_aic(&noiseless(&truth), &FitOptions::default()).unwrap();
        assert_eq!(best.variant, Variant::Symmetric);
    }

    #[test]
    fn selection_prefers_asymmetric_on_strongly_asymmetric_data() {
        let truth = ColliderParams::new(0.1, 0.9, 0.3, 0.5).unwrap();
        let best = select_by_aic(&noiseless(&truth), &FitOptions::default()).unwrap();
        assert_eq!(best.variant, Variant::Asymmetric);
        assert!(best.rss <= 1e-6);
    }

    #[test]
    fn nested_models_preserve_rss_ordering() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let truth = ColliderParams::new(
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
            )
            .unwrap();
            let mut means = predict_all(&truth).unwrap();
            for m in means.iter_mut() {
                *m = (*m + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0);
            }
            let obs = TaskObservations::from_means(means).unwrap();
            let opts = FitOptions::default();
            let sym = fit(&obs, Variant::Symmetric, &opts).unwrap();
            let asym = fit(&obs, Variant::Asymmetric, &opts).unwrap();
            assert!(
                asym.rss <= sym.rss + 1e-9,
                "asym rss {} vs sym rss {}",
                asym.rss,
                sym.rss
            );
        }
    }

    #[test]
    fn fits_are_bit_reproducible() {
        let obs = TaskObservations::from_means([
            0.9, 0.8, 0.7, 0.45, 0.5, 0.55, 0.6, 0.75, 0.2, 0.25, 0.3,
        ])
        .unwrap();
        let opts = FitOptions {
            seed: 17,
            ..FitOptions::default()
        };
        let a = fit(&obs, Variant::Asymmetric, &opts).unwrap();
        let b = fit(&obs, Variant::Asymmetric, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loocv_is_near_one_on_noiseless_data_and_drops_under_corruption() {
        let truth = ColliderParams::new(0.15, 0.85, 0.6, 0.4).unwrap();
        let obs = noiseless(&truth);
        let opts = FitOptions::default();
        let clean = loocv_r2(&obs, Variant::Asymmetric, &opts).unwrap();
        assert!(clean.loocv_r2 >= 0.999, "r2 = {}", clean.loocv_r2);
        assert!(clean.loocv_r2 <= 1.0);

        let mut means = predict_all(&truth).unwrap();
        means[TaskId::IX.index()] = (means[TaskId::IX.index()] + 0.3).clamp(0.0, 1.0);
        let corrupted = TaskObservations::from_means(means).unwrap();
        let worse = loocv_r2(&corrupted, Variant::Asymmetric, &opts).unwrap();
        assert!(
            worse.loocv_r2 < clean.loocv_r2,
            "{} !< {}",
            worse.loocv_r2,
            clean.loocv_r2
        );
    }

    #[test]
    fn loocv_rejects_constant_means() {
        let obs = TaskObservations::from_means([0.5; 11]).unwrap();
        assert_eq!(
            loocv_r2(&obs, Variant::Symmetric, &FitOptions::default()).unwrap_err(),
            EstimatorError::DegenerateVariance
        );
    }

    #[test]
    fn aic_selection_rate_under_symmetric_noise_is_stable() {
        // Selection rates under noise are a fixed property of the AIC form:
        // with n = 11 the penalty difference between variants is 2, so the
        // symmetric model wins iff RSS_sym/RSS_asym < e^{2/11} ≈ 1.199. One
        // extra parameter soaks up roughly a χ²₁ share of the noise, which
        // puts that event near 75% regardless of σ. Freeze the band so a
        // quiet regression in either fit path shows up here.
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let truth = ColliderParams::symmetric(0.1, 0.8, 0.5).unwrap();
        let clean = predict_all(&truth).unwrap();
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let opts = FitOptions::default();

        let mut symmetric_wins = 0;
        let reps = 100;
        for _ in 0..reps {
            let mut means = clean;
            for m in means.iter_mut() {
                *m = (*m + noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
            let obs = TaskObservations::from_means(means).unwrap();
            if select_by_aic(&obs, &opts).unwrap().variant == Variant::Symmetric {
                symmetric_wins += 1;
            }
        }
        assert!(
            (60..=90).contains(&symmetric_wins),
            "symmetric selected {symmetric_wins}/{reps} times"
        );
    }

    #[test]
    fn golden_line_search_finds_a_parabola_minimum() {
        let (x, fx) = golden_min(|v| (v - 0.37) * (v - 0.37) + 1.0);
        // Comparison-based search cannot localize a quadratic minimum
        // tighter than ~sqrt(machine epsilon): nearby f values collide in
        // double precision. The f value itself is good to ~1e-16.
        assert_relative_eq!(x, 0.37, epsilon = 1e-7);
        assert_relative_eq!(fx, 1.0, epsilon = 1e-12);
    }
}
