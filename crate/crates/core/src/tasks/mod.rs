//! Computations composed from propagation, inverse design and readout:
//! logic gates, short-term memory and noise-robustness evaluation.

pub mod gates;
pub mod memory;
pub mod noise;

use serde::{Deserialize, Serialize};

use crate::error::{CvnnError, Result};
use crate::propagator::Propagator;
use crate::seeding::derive_seed;
use crate::state::{NetworkState, Trajectory};

/// Additive noise applied during forward runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub std: f64,
    pub step_s: f64,
    pub seed: u64,
}

impl NoiseSettings {
    pub fn none() -> Self {
        Self {
            std: 0.0,
            step_s: 1e-3,
            seed: 0,
        }
    }

    pub fn new(std: f64, seed: u64) -> Self {
        Self {
            std,
            step_s: 1e-3,
            seed,
        }
    }

    pub fn is_noisy(&self) -> bool {
        self.std > 0.0
    }

    /// Independent stream for a sub-run.
    pub fn fork(&self, path: &[u64]) -> Self {
        Self {
            seed: derive_seed(self.seed, path),
            ..*self
        }
    }
}

/// Advance `state` by `duration_s`, with or without noise.
pub fn advance(
    prop: &Propagator,
    state: &NetworkState,
    duration_s: f64,
    noise: &NoiseSettings,
) -> Result<NetworkState> {
    if noise.is_noisy() {
        prop.evolve_noisy(state, duration_s, noise.step_s, noise.std, noise.seed)
    } else {
        prop.evolve(state, duration_s)
    }
}

/// Run from `state` for `duration_s`, sampling every `sample_step_s`.
/// Samples cover `[t0, t0 + duration)`; the returned state is the one at
/// `t0 + duration`.
pub fn run_segment(
    prop: &Propagator,
    state: &NetworkState,
    duration_s: f64,
    sample_step_s: f64,
    noise: &NoiseSettings,
) -> Result<(Trajectory, NetworkState)> {
    if !(sample_step_s > 0.0) || !(duration_s >= 0.0) {
        return Err(CvnnError::invalid(format!(
            "need sample step > 0 and duration >= 0, got {sample_step_s} and {duration_s}"
        )));
    }
    let count = (duration_s / sample_step_s).round() as usize;
    let t0 = state.time_s;
    if !noise.is_noisy() {
        let mut tr = prop.sample(state, count, sample_step_s)?;
        // Pin sample times to the grid to avoid drift in long runs.
        for (k, t) in tr.times.iter_mut().enumerate() {
            *t = t0 + k as f64 * sample_step_s;
        }
        let end = prop.evolve(state, duration_s)?;
        return Ok((tr, end));
    }
    let mut tr = Trajectory::default();
    let mut cur = state.clone();
    for k in 0..count {
        tr.push(t0 + k as f64 * sample_step_s, cur.values.clone());
        let dt = if k + 1 == count {
            duration_s - k as f64 * sample_step_s
        } else {
            sample_step_s
        };
        cur = prop.evolve_noisy(&cur, dt, noise.step_s, noise.std, derive_seed(noise.seed, &[k as u64]))?;
    }
    if count == 0 {
        cur = advance(prop, state, duration_s, noise)?;
    }
    cur.time_s = t0 + duration_s;
    Ok((tr, cur))
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelParams;
    use crate::seeding::rng_from;

    #[test]
    fn wilson_known_values() {
        // 95% interval for 8/10 from the closed-form expression.
        let (lo, hi) = wilson_interval(8, 10, 1.959964);
        assert!((lo - 0.4902).abs() < 1e-3, "{lo}");
        assert!((hi - 0.9433).abs() < 1e-3, "{hi}");
        let (lo, hi) = wilson_interval(0, 0, 1.96);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn segment_sampling_and_end_state() {
        let p = ModelParams::default().with_nodes(32);
        let prop = Propagator::from_params(&p).unwrap();
        let x = NetworkState::random_phases(32, 1.0, &mut rng_from(1, &[]));
        let (tr, end) = run_segment(&prop, &x, 0.5, 0.01, &NoiseSettings::none()).unwrap();
        assert_eq!(tr.len(), 50);
        assert_eq!(tr.times[0], 1.0);
        assert!((end.time_s - 1.5).abs() < 1e-12);
        let direct = prop.evolve(&x, 0.5).unwrap();
        assert_eq!(end, direct);

        let noisy = NoiseSettings::new(0.1, 3);
        let (tr, end) = run_segment(&prop, &x, 0.5, 0.01, &noisy).unwrap();
        assert_eq!(tr.len(), 50);
        assert!((end.time_s - 1.5).abs() < 1e-12);
        let (_, again) = run_segment(&prop, &x, 0.5, 0.01, &noisy).unwrap();
        assert_eq!(end, again);
    }
}
