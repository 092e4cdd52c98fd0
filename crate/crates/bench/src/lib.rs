//! Shared fixtures for the benches: the worked-example parameter point and a
//! noisy battery shaped like one real agent sweep.

use collider_core::estimator::TaskObservations;
use collider_core::params::ColliderParams;
use collider_core::tasks::{predict_all, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The parameter point used in the library docs: b = 0.2, m1 = 0.8,
/// m2 = 0.6, pC = 0.5.
pub fn reference_params() -> ColliderParams {
    ColliderParams::new(0.2, 0.8, 0.6, 0.5).expect("reference point is valid")
}

/// Twenty jittered responses per task around the reference battery — the
/// size and shape the estimator sees after a typical sweep.
pub fn sweep_observations(seed: u64) -> TaskObservations {
    let battery = predict_all(&reference_params()).expect("reference battery");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TaskObservations::from_pairs(TaskId::ALL.into_iter().flat_map(|task| {
        let mean = battery[task.index()];
        (0..20)
            .map(|_| (task, (mean + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0)))
            .collect::<Vec<_>>()
    }))
    .expect("jittered battery stays in range")
}
