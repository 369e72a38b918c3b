//! Network constants and the coupling structure of the ring.
//!
//! The state obeys `dx/dt = (i*omega*I + K) x` with `K = eps * e^{-i*phi} * A`.
//! `A` holds non-negative weights that decay exponentially with ring
//! distance, has a zero diagonal and is normalized so every row sums to 1.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{CvnnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Periodic one-dimensional lattice.
    #[default]
    Ring,
}

/// Public constants of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub n_nodes: usize,
    pub natural_frequency_hz: f64,
    pub coupling_strength: f64,
    pub phase_delay_rad: f64,
    /// Spatial decay rate of the coupling kernel, per node of ring distance.
    pub decay_rate: f64,
    pub topology: Topology,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_nodes: 256,
            natural_frequency_hz: 10.0,
            coupling_strength: 2.0,
            phase_delay_rad: FRAC_PI_2,
            decay_rate: 2.0,
            topology: Topology::Ring,
        }
    }
}

impl ModelParams {
    pub fn omega(&self) -> f64 {
        TAU * self.natural_frequency_hz
    }

    /// Phase delay reduced to `[0, 2*pi)`.
    pub fn phase_delay_wrapped(&self) -> f64 {
        self.phase_delay_rad.rem_euclid(TAU)
    }

    pub fn with_phase_delay(mut self, phi: f64) -> Self {
        self.phase_delay_rad = phi;
        self
    }

    pub fn with_coupling(mut self, eps: f64) -> Self {
        self.coupling_strength = eps;
        self
    }

    pub fn with_nodes(mut self, n: usize) -> Self {
        self.n_nodes = n;
        self
    }

    pub fn with_frequency(mut self, f_hz: f64) -> Self {
        self.natural_frequency_hz = f_hz;
        self
    }

    pub fn with_decay(mut self, alpha: f64) -> Self {
        self.decay_rate = alpha;
        self
    }

    /// Every violated constraint, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_nodes < 2 {
            out.push(format!("n_nodes must be >= 2, got {}", self.n_nodes));
        }
        if !(self.natural_frequency_hz.is_finite() && self.natural_frequency_hz > 0.0) {
            out.push(format!(
                "natural_frequency_hz must be > 0, got {}",
                self.natural_frequency_hz
            ));
        }
        if !(self.coupling_strength.is_finite() && self.coupling_strength >= 0.0) {
            out.push(format!(
                "coupling_strength must be >= 0, got {}",
                self.coupling_strength
            ));
        }
        if !self.phase_delay_rad.is_finite() {
            out.push("phase_delay_rad must be finite".to_string());
        }
        if !(self.decay_rate.is_finite() && self.decay_rate > 0.0) {
            out.push(format!("decay_rate must be > 0, got {}", self.decay_rate));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CvnnError::InvalidParameter(v.join("; ")))
        }
    }
}

/// Dense `N x N` weight matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    weights: Vec<f64>,
    circulant: bool,
}

impl CouplingMatrix {
    /// Wrap an arbitrary dense matrix. The circulant flag is left unset so
    /// factorization takes the dense path.
    pub fn from_dense(n: usize, weights: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(CvnnError::invalid(format!("n_nodes must be >= 2, got {n}")));
        }
        if weights.len() != n * n {
            return Err(CvnnError::invalid(format!(
                "expected {} weights, got {}",
                n * n,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CvnnError::invalid("coupling weights must be finite"));
        }
        Ok(Self {
            n,
            weights,
            circulant: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn is_circulant(&self) -> bool {
        self.circulant
    }

    /// Same weights with the circulant flag cleared.
    pub fn as_dense(&self) -> Self {
        Self {
            circulant: false,
            ..self.clone()
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

/// Shortest distance between two nodes on a ring of `n` nodes.
pub fn ring_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j) % n;
    d.min(n - d)
}

/// Node indices of a `width`-node patch around `center`, wrapping modulo `n`.
/// The patch starts `width / 2` nodes before the center.
pub fn ring_patch(center: usize, width: usize, n: usize) -> impl Iterator<Item = usize> {
    let start = (center % n + n - (width / 2) % n) % n;
    (0..width).map(move |k| (start + k) % n)
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Exponentially decaying ring kernel, zero diagonal, rows normalized to 1.
pub fn build_ring_coupling(params: &ModelParams) -> Result<CouplingMatrix> {
    params.validate()?;
    let n = params.n_nodes;
    let alpha = params.decay_rate;

    let mut first_row: Vec<f64> = (0..n)
        .map(|j| match ring_distance(0, j, n) {
            0 => 0.0,
            d => (-alpha * d as f64).exp(),
        })
        .collect();
    let sum: f64 = first_row.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(CvnnError::invalid(format!(
            "coupling kernel underflows for decay_rate {alpha}"
        )));
    }
    first_row.iter_mut().for_each(|w| *w /= sum);

    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            weights[i * n + j] = first_row[(j + n - i) % n];
        }
    }
    Ok(CouplingMatrix {
        n,
        weights,
        circulant: true,
    })
}
