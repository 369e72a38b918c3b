//! Accuracy of the gate and memory tasks under additive noise, and the
//! calibration of the noise level against a target phase jitter.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gates::{build_gate_inputs, table_correct, truth_table, GateConfig, GateKind};
use super::memory::{run_item_trial, MemoryTask};
use super::{wilson_interval, NoiseSettings};
use crate::error::{CvnnError, Result};
use crate::network::wrap_phase;
use crate::patterns::{apply_input, random_initial_state};
use crate::propagator::Propagator;
use crate::seeding::{derive_seed, rng_from};
use crate::state::NetworkState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Xor,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub noise_std: f64,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One XOR trial: the whole truth table must come out right.
pub fn xor_trial(
    config: &GateConfig,
    prop: &Propagator,
    noise_std: f64,
    seed: u64,
) -> Result<bool> {
    let cfg = GateConfig {
        gate: GateKind::Xor,
        ..config.clone()
    };
    let spec = build_gate_inputs(&cfg, prop)?;
    let x0 = random_initial_state(prop.n(), &mut rng_from(seed, &[0]));
    let noise = NoiseSettings::new(noise_std, derive_seed(seed, &[1]));
    let table = truth_table(&spec, &x0, prop, &noise)?;
    Ok(table_correct(GateKind::Xor, &table))
}

/// One memory trial: a seed-chosen item must be the unique active unit for
/// the whole hold.
pub fn memory_trial(task: &MemoryTask, prop: &Propagator, noise_std: f64, seed: u64) -> Result<bool> {
    let item = (derive_seed(seed, &[2]) % task.n_items as u64) as usize;
    let noise = NoiseSettings::new(noise_std, derive_seed(seed, &[1]));
    run_item_trial(task, prop, item, seed, &noise).map(|(ok, _)| ok)
}

/// Accuracy per noise level with 95% Wilson intervals. Trial `k` at every
/// level uses the same base seed, so levels differ only in noise.
pub fn noise_robustness_eval(
    kind: TaskKind,
    noise_levels: &[f64],
    trials: usize,
    base_seed: u64,
    gate: &GateConfig,
    memory: &MemoryTask,
    prop: &Propagator,
) -> Result<Vec<AccuracyRow>> {
    if let Some(s) = noise_levels.iter().find(|s| !(**s >= 0.0)) {
        return Err(CvnnError::invalid(format!("noise level must be >= 0, got {s}")));
    }
    noise_levels
        .iter()
        .map(|&sigma| {
            let outcomes: Vec<bool> = (0..trials)
                .into_par_iter()
                .map(|k| {
                    let seed = derive_seed(base_seed, &[k as u64]);
                    match kind {
                        TaskKind::Xor => xor_trial(gate, prop, sigma, seed),
                        TaskKind::Memory => memory_trial(memory, prop, sigma, seed),
                    }
                })
                .collect::<Result<_>>()?;
            let correct = outcomes.iter().filter(|&&b| b).count();
            let (ci_low, ci_high) = wilson_interval(correct, trials, 1.959964);
            Ok(AccuracyRow {
                noise_std: sigma,
                trials,
                correct,
                accuracy: if trials == 0 {
                    0.0
                } else {
                    correct as f64 / trials as f64
                },
                ci_low,
                ci_high,
            })
        })
        .collect()
}

pub fn write_accuracy_csv<W: Write>(mut w: W, rows: &[AccuracyRow]) -> Result<()> {
    writeln!(w, "noise_std,trials,correct,accuracy,ci_low,ci_high")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.noise_std, r.trials, r.correct, r.accuracy, r.ci_low, r.ci_high
        )?;
    }
    Ok(())
}

/// RMS over all nodes of the wrapped phase difference between
/// `exact + sigma * unit_noise` and `exact`.
fn jitter_rms(pairs: &[(NetworkState, NetworkState)], sigma: f64) -> f64 {
    let mut sq = 0.0;
    let mut count = 0usize;
    for (exact, eta) in pairs {
        for (x, e) in exact.values.iter().zip(&eta.values) {
            let d = wrap_phase((x + e * sigma).arg() - x.arg());
            sq += d * d;
            count += 1;
        }
    }
    (sq / count.max(1) as f64).sqrt()
}

/// Noise level at which the per-node phase jitter at decode time of the
/// XOR task (X on) has RMS `target_rad`. Noise is additive and the dynamics
/// linear, so the noisy final state is `exact + sigma * eta` with `eta` the
/// propagated unit noise; `sigma` is then found by bisection.
pub fn calibrate_xor_noise(
    config: &GateConfig,
    prop: &Propagator,
    target_rad: f64,
    samples: usize,
    base_seed: u64,
) -> Result<f64> {
    if !(target_rad > 0.0 && target_rad < std::f64::consts::PI / 3f64.sqrt()) {
        return Err(CvnnError::invalid(format!(
            "target jitter must be in (0, pi/sqrt(3)), got {target_rad}"
        )));
    }
    let cfg = GateConfig {
        gate: GateKind::Xor,
        ..config.clone()
    };
    let spec = build_gate_inputs(&cfg, prop)?;
    let t_apply = spec.apply_time_s();
    let t_decode = spec.decode_time_s;
    let step = NoiseSettings::none().step_s;
    let pairs: Vec<(NetworkState, NetworkState)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(base_seed, &[k as u64]);
            let x0 = random_initial_state(prop.n(), &mut rng_from(seed, &[0]));
            let at_apply = prop.evolve(&x0, t_apply)?;
            let exact = prop.evolve(&apply_input(&at_apply, &spec.input_x)?, t_decode - t_apply)?;
            let zero = NetworkState::zeros(prop.n(), 0.0);
            let eta = prop.evolve_noisy(&zero, t_decode, step, 1.0, derive_seed(seed, &[1]))?;
            Ok((exact, eta))
        })
        .collect::<Result<_>>()?;

    let mut hi = 1.0;
    while jitter_rms(&pairs, hi) < target_rad {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(CvnnError::invalid("jitter calibration did not bracket"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if jitter_rms(&pairs, mid) < target_rad {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Measured jitter RMS at decode time for the XOR task at `sigma`, from
/// full noisy runs (used to check the calibration).
pub fn measure_xor_jitter(
    config: &GateConfig,
    prop: &Propagator,
    sigma: f64,
    samples: usize,
    base_seed: u64,
) -> Result<f64> {
    let cfg = GateConfig {
        gate: GateKind::Xor,
        ..config.clone()
    };
    let spec = build_gate_inputs(&cfg, prop)?;
    let t_apply = spec.apply_time_s();
    let pairs: Vec<(NetworkState, NetworkState)> = (0..samples)
        .map(|k| {
            let seed = derive_seed(base_seed, &[k as u64]);
            let x0 = random_initial_state(prop.n(), &mut rng_from(seed, &[0]));
            let run = |noise: &NoiseSettings| -> Result<NetworkState> {
                let a = super::advance(prop, &x0, t_apply, &noise.fork(&[0]))?;
                let a = NetworkState::new(a.values, t_apply);
                super::advance(
                    prop,
                    &apply_input(&a, &spec.input_x)?,
                    spec.decode_time_s - t_apply,
                    &noise.fork(&[1]),
                )
            };
            let exact = run(&NoiseSettings::none())?;
            let noisy = run(&NoiseSettings::new(sigma, derive_seed(seed, &[9])))?;
            let diff = NetworkState::new(
                noisy
                    .values
                    .iter()
                    .zip(&exact.values)
                    .map(|(a, b)| a - b)
                    .collect(),
                exact.time_s,
            );
            Ok((exact, diff))
        })
        .collect::<Result<_>>()?;
    Ok(jitter_rms(&pairs, 1.0))
}
