use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CvnnError, Result};
use crate::network::wrap_phase;

/// Network state `x(t)`. Serialized as `{time_s, values: [[re, im], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub time_s: f64,
    pub values: Vec<Complex64>,
}

impl NetworkState {
    pub fn new(values: Vec<Complex64>, time_s: f64) -> Self {
        Self { time_s, values }
    }

    pub fn zeros(n: usize, time_s: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n], time_s)
    }

    /// Unit amplitudes with independent uniform phases.
    pub fn random_phases<R: Rng + ?Sized>(n: usize, time_s: f64, rng: &mut R) -> Self {
        let values = (0..n)
            .map(|_| Complex64::from_polar(1.0, uniform_phase(rng)))
            .collect();
        Self::new(values, time_s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// `Arg x_j` for every node; exact zeros are rejected.
    pub fn phases(&self) -> Result<Vec<f64>> {
        checked_phases(&self.values)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new(self.values.iter().map(|v| v * factor).collect(), self.time_s)
    }

    pub fn amplitude_stats(&self) -> AmplitudeStats {
        amplitude_stats(&self.values)
    }
}

pub(crate) fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    wrap_phase(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn checked_phases(values: &[Complex64]) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(node, z)| {
            if z.re == 0.0 && z.im == 0.0 {
                Err(CvnnError::UndefinedPhase { node })
            } else {
                Ok(z.arg())
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeStats {
    pub min: f64,
    pub max: f64,
    pub rms: f64,
}

pub fn amplitude_stats(values: &[Complex64]) -> AmplitudeStats {
    if values.is_empty() {
        return AmplitudeStats {
            min: 0.0,
            max: 0.0,
            rms: 0.0,
        };
    }
    let (min, max, sq) = values.iter().fold(
        (f64::INFINITY, 0.0f64, 0.0),
        |(lo, hi, sq), z| {
            let a = z.norm();
            (lo.min(a), hi.max(a), sq + a * a)
        },
    );
    AmplitudeStats {
        min,
        max,
        rms: (sq / values.len() as f64).sqrt(),
    }
}

/// States sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, time_s: f64, values: Vec<Complex64>) {
        self.times.push(time_s);
        self.states.push(values);
    }

    /// Append `other`, skipping its leading samples that are not strictly
    /// later than our last one.
    pub fn extend(&mut self, other: Trajectory) {
        let last = self.times.last().copied().unwrap_or(f64::NEG_INFINITY);
        for (t, s) in other.times.into_iter().zip(other.states) {
            if t > last + 1e-12 {
                self.push(t, s);
            }
        }
    }

    /// Sampling step; errors when empty or not uniform to 1e-6 relative.
    pub fn step(&self) -> Result<f64> {
        match self.times.len() {
            0 => Err(CvnnError::EmptyTrajectory),
            1 => Ok(0.0),
            _ => {
                let dt = self.times[1] - self.times[0];
                if !(dt > 0.0) {
                    return Err(CvnnError::invalid("trajectory times must increase"));
                }
                for w in self.times.windows(2) {
                    if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1e-9) {
                        return Err(CvnnError::invalid("trajectory must be uniformly sampled"));
                    }
                }
                Ok(dt)
            }
        }
    }

    /// Samples with `t0 <= t < t1`.
    pub fn window(&self, t0: f64, t1: f64) -> Trajectory {
        let mut out = Trajectory::default();
        for (t, s) in self.times.iter().zip(&self.states) {
            if *t >= t0 - 1e-9 && *t < t1 - 1e-9 {
                out.push(*t, s.clone());
            }
        }
        out
    }

    pub fn phase_matrix(&self) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .map(|s| s.iter().map(|z| z.arg()).collect())
            .collect()
    }
}
