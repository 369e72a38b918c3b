//! Leaky integrate-and-fire model neuron driven by a patch current.
//!
//! Units: time in seconds, voltage in mV, resistance in MOhm, current in nA
//! (so `R * I` is in mV).

use serde::{Deserialize, Serialize};

use crate::decode::{patch_current, DecoderPatch, TimeSeries};
use crate::error::{CvnnError, Result};
use crate::state::Trajectory;

/// Spikes needed in the decode window for a positive decision.
pub const DEFAULT_MIN_SPIKES: usize = 3;

/// Largest integration step accepted by [`lif_simulate`].
pub const MAX_STEP_S: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifParams {
    pub membrane_tau_s: f64,
    pub v_rest_mv: f64,
    pub v_threshold_mv: f64,
    pub v_reset_mv: f64,
    pub membrane_resistance_mohm: f64,
    pub refractory_s: f64,
    /// nA per unit of summed cosine drive.
    pub current_gain: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        let mut p = Self {
            membrane_tau_s: 0.02,
            v_rest_mv: -70.0,
            v_threshold_mv: -50.0,
            v_reset_mv: -70.0,
            membrane_resistance_mohm: 100.0,
            refractory_s: 0.002,
            current_gain: 0.0,
        };
        p.current_gain = p.tuned_gain(32, 10.0, 1.5);
        p
    }
}

impl LifParams {
    /// Smallest constant current that eventually reaches threshold.
    pub fn rheobase_na(&self) -> f64 {
        (self.v_threshold_mv - self.v_rest_mv) / self.membrane_resistance_mohm
    }

    /// Gain at which a fully coherent patch of `width` nodes oscillating at
    /// `freq_hz` drives the membrane to `factor` times the rheobase
    /// depolarization (steady-state sinusoidal response of the leaky
    /// membrane).
    pub fn tuned_gain(&self, width: usize, freq_hz: f64, factor: f64) -> f64 {
        let wt = std::f64::consts::TAU * freq_hz * self.membrane_tau_s;
        factor * self.rheobase_na() * (1.0 + wt * wt).sqrt() / width as f64
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.membrane_tau_s > 0.0) {
            v.push("membrane_tau_s must be > 0".to_string());
        }
        if !(self.refractory_s >= 0.0) {
            v.push("refractory_s must be >= 0".to_string());
        }
        if !(self.membrane_resistance_mohm > 0.0) {
            v.push("membrane_resistance_mohm must be > 0".to_string());
        }
        if !(self.v_reset_mv <= self.v_rest_mv && self.v_rest_mv < self.v_threshold_mv) {
            v.push("need v_reset_mv <= v_rest_mv < v_threshold_mv".to_string());
        }
        if !(self.current_gain >= 0.0 && self.current_gain.is_finite()) {
            v.push("current_gain must be >= 0".to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(CvnnError::InvalidParameter(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub spike_times_s: Vec<f64>,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.spike_times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_times_s.is_empty()
    }

    /// Mean rate over the inter-spike intervals, in Hz.
    pub fn mean_rate_hz(&self) -> Option<f64> {
        let s = &self.spike_times_s;
        if s.len() < 2 {
            return None;
        }
        Some((s.len() - 1) as f64 / (s[s.len() - 1] - s[0]))
    }
}

fn interpolate(series: &TimeSeries, t: f64) -> f64 {
    let ts = &series.times;
    let vs = &series.values;
    if t <= ts[0] {
        return vs[0];
    }
    if t >= ts[ts.len() - 1] {
        return vs[vs.len() - 1];
    }
    let k = ts.partition_point(|&x| x <= t) - 1;
    let w = (t - ts[k]) / (ts[k + 1] - ts[k]);
    vs[k] * (1.0 - w) + vs[k + 1] * w
}

/// Exponential-Euler integration of `tau dV/dt = -(V - V_rest) + R I(t)`
/// from `V_rest` at the first sample time to the last one. The current is
/// linearly interpolated between samples and held over each step at its
/// midpoint value, which makes constant drives exact. Threshold crossings are
/// located inside the step by solving the exponential relaxation.
pub fn lif_simulate(current: &TimeSeries, lif: &LifParams, step_s: f64) -> Result<SpikeTrain> {
    lif.validate()?;
    if !(step_s > 0.0 && step_s <= MAX_STEP_S) {
        return Err(CvnnError::invalid(format!(
            "LIF step must be in (0, {MAX_STEP_S}] s, got {step_s}"
        )));
    }
    if current.is_empty() {
        return Err(CvnnError::EmptyTrajectory);
    }
    let t_end = current.times[current.len() - 1];
    let tau = lif.membrane_tau_s;
    let mut t = current.times[0];
    let mut v = lif.v_rest_mv;
    let mut refractory_until = f64::NEG_INFINITY;
    let mut spikes = Vec::new();

    while t < t_end - 1e-12 {
        let h = step_s.min(t_end - t);
        if t < refractory_until {
            t = (t + h).min(refractory_until);
            v = lif.v_reset_mv;
            continue;
        }
        let v_inf = lif.v_rest_mv + lif.membrane_resistance_mohm * interpolate(current, t + h / 2.0);
        let v_next = v_inf + (v - v_inf) * (-h / tau).exp();
        if v_next >= lif.v_threshold_mv {
            let s = if v_inf > lif.v_threshold_mv {
                (tau * ((v - v_inf) / (lif.v_threshold_mv - v_inf)).ln()).clamp(0.0, h)
            } else {
                h
            };
            let spike = t + s;
            spikes.push(spike);
            v = lif.v_reset_mv;
            refractory_until = spike + lif.refractory_s;
            t = spike;
            if lif.refractory_s == 0.0 {
                // Avoid stalling when the reset sits above threshold drive.
                t = spike + f64::EPSILON.max(1e-12);
            }
        } else {
            v = v_next;
            t += h;
        }
    }
    Ok(SpikeTrain {
        spike_times_s: spikes,
    })
}

/// Closed-form period of the LIF neuron under constant current `i_na`;
/// `None` below rheobase.
pub fn constant_current_period(lif: &LifParams, i_na: f64) -> Option<f64> {
    let drive = lif.v_rest_mv + lif.membrane_resistance_mohm * i_na;
    if drive <= lif.v_threshold_mv {
        return None;
    }
    Some(
        lif.refractory_s
            + lif.membrane_tau_s * ((drive - lif.v_reset_mv) / (drive - lif.v_threshold_mv)).ln(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifDecision {
    pub fired: bool,
    pub spikes: SpikeTrain,
}

/// Inject the patch current of `trajectory` and report whether at least
/// `min_spikes` spikes occur over its span.
pub fn lif_decode(
    trajectory: &Trajectory,
    patch: &DecoderPatch,
    lif: &LifParams,
    gain: f64,
    min_spikes: usize,
) -> Result<LifDecision> {
    let current = patch_current(trajectory, patch, gain)?;
    let spikes = lif_simulate(&current, lif, MAX_STEP_S)?;
    Ok(LifDecision {
        fired: spikes.len() >= min_spikes,
        spikes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    fn constant(i: f64, duration: f64) -> TimeSeries {
        TimeSeries {
            times: vec![0.0, duration],
            values: vec![i, i],
        }
    }

    #[test]
    fn silent_without_current() {
        let lif = LifParams::default();
        let s = lif_simulate(&constant(0.0, 1.0), &lif, 1e-4).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn rate_matches_closed_form() {
        let lif = LifParams::default();
        for i in [0.25, 0.4, 1.0] {
            let s = lif_simulate(&constant(i, 2.0), &lif, 1e-4).unwrap();
            let rate = s.mean_rate_hz().unwrap();
            let expect = 1.0 / constant_current_period(&lif, i).unwrap();
            assert!((rate - expect).abs() < 0.02 * expect, "{rate} vs {expect}");
        }
        assert!(constant_current_period(&lif, 0.19).is_none());
    }

    #[test]
    fn intervals_respect_refractory() {
        let lif = LifParams::default();
        let s = lif_simulate(&constant(5.0, 0.5), &lif, 1e-4).unwrap();
        for w in s.spike_times_s.windows(2) {
            assert!(w[1] - w[0] >= lif.refractory_s - 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut lif = LifParams::default();
        lif.v_reset_mv = -40.0;
        assert!(lif_simulate(&constant(1.0, 0.1), &lif, 1e-4).is_err());
        let lif = LifParams::default();
        assert!(lif_simulate(&constant(1.0, 0.1), &lif, 1e-3).is_err());
    }

    #[test]
    fn coherent_patch_fires_and_zero_gain_does_not() {
        let lif = LifParams::default();
        let mut tr = Trajectory::default();
        for k in 0..1000 {
            let t = k as f64 * 1e-3;
            tr.push(t, vec![Complex64::from_polar(1.0, TAU * 10.0 * t); 32]);
        }
        let patch = DecoderPatch::starting_at(0, 32);
        let d = lif_decode(&tr, &patch, &lif, lif.current_gain, DEFAULT_MIN_SPIKES).unwrap();
        assert!(d.fired);
        assert!(d.spikes.len() >= 8, "{}", d.spikes.len());
        let d = lif_decode(&tr, &patch, &lif, 0.0, DEFAULT_MIN_SPIKES).unwrap();
        assert!(!d.fired);
    }
}
