//! Target phase patterns, inverse input design and the pattern similarity.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CvnnError, Result};
use crate::network::{ring_patch, wrap_phase, ModelParams};
use crate::propagator::Propagator;
use crate::seeding::rng_from;
use crate::state::{checked_phases, l2_norm, uniform_phase, NetworkState};

/// Tolerance on `state.time_s == input.apply_time_s`.
pub const SCHEDULE_TOLERANCE_S: f64 = 1e-9;

/// Desired phases (and amplitudes) at a target time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPattern {
    pub phases: Vec<f64>,
    pub amplitudes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TargetPattern {
    pub fn new(phases: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        if phases.len() != amplitudes.len() {
            return Err(CvnnError::InvalidSpec(
                "phases and amplitudes differ in length".into(),
            ));
        }
        if let Some(node) = amplitudes.iter().position(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(CvnnError::UndefinedPhase { node });
        }
        Ok(Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
            amplitudes,
            label: None,
        })
    }

    /// Polar decomposition of `values`; zeros are rejected.
    pub fn from_complex(values: &[Complex64]) -> Result<Self> {
        let phases = checked_phases(values)?;
        Self::new(phases, values.iter().map(|z| z.norm()).collect())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .zip(&self.amplitudes)
            .map(|(&p, &a)| Complex64::from_polar(a, p))
            .collect()
    }

    /// Multiply every amplitude by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            ..self.clone()
        }
    }

    pub fn as_state(&self, time_s: f64) -> NetworkState {
        NetworkState::new(self.to_complex(), time_s)
    }
}

/// Additive perturbation of the state vector, applied at `apply_time_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputVector {
    pub values: Vec<Complex64>,
    pub apply_time_s: f64,
    pub lead_time_s: f64,
    pub input_norm: f64,
}

impl InputVector {
    pub fn new(values: Vec<Complex64>, apply_time_s: f64, lead_time_s: f64) -> Result<Self> {
        if !(lead_time_s > 0.0) {
            return Err(CvnnError::invalid(format!(
                "lead time must be > 0, got {lead_time_s}"
            )));
        }
        let input_norm = l2_norm(&values);
        Ok(Self {
            values,
            apply_time_s,
            lead_time_s,
            input_norm,
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    /// Componentwise sum; both inputs must share the apply time.
    pub fn plus(&self, other: &InputVector) -> Result<Self> {
        if (self.apply_time_s - other.apply_time_s).abs() > SCHEDULE_TOLERANCE_S {
            return Err(CvnnError::Scheduling {
                expected_s: self.apply_time_s,
                actual_s: other.apply_time_s,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        InputVector::new(values, self.apply_time_s, self.lead_time_s)
    }
}

/// A phase-coherent patch on an otherwise random-phase background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSpec {
    pub center: usize,
    pub width: usize,
    pub cluster_phase_rad: f64,
    /// Cluster amplitude relative to the unit background amplitude.
    pub amplitude_gain: f64,
    pub background_seed: u64,
}

impl Default for ClusterSpec {
    /// 32-node cluster centred on node 128.
    fn default() -> Self {
        Self::new(128, 32)
    }
}

impl ClusterSpec {
    pub fn new(center: usize, width: usize) -> Self {
        Self {
            center,
            width,
            cluster_phase_rad: 0.0,
            amplitude_gain: 3.0,
            background_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.background_seed = seed;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.amplitude_gain = gain;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.cluster_phase_rad = phase;
        self
    }

    pub fn indices(&self, n: usize) -> impl Iterator<Item = usize> {
        ring_patch(self.center, self.width, n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.width == 0 || self.width >= n {
            return Err(CvnnError::InvalidSpec(format!(
                "cluster width must be in 1..{n}, got {}",
                self.width
            )));
        }
        if !(self.amplitude_gain > 0.0 && self.amplitude_gain.is_finite()) {
            return Err(CvnnError::InvalidSpec(format!(
                "amplitude gain must be > 0, got {}",
                self.amplitude_gain
            )));
        }
        if !self.cluster_phase_rad.is_finite() {
            return Err(CvnnError::InvalidSpec("cluster phase must be finite".into()));
        }
        Ok(())
    }
}

/// Background phases of a cluster target: all `n` nodes drawn from the seed,
/// so the background does not depend on where the cluster sits.
fn background_phases(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[0xBAC6]);
    (0..n).map(|_| uniform_phase(&mut rng)).collect()
}

pub fn make_cluster_target(spec: &ClusterSpec, params: &ModelParams) -> Result<TargetPattern> {
    let n = params.n_nodes;
    spec.validate(n)?;
    let mut phases = background_phases(n, spec.background_seed);
    let mut amplitudes = vec![1.0; n];
    let phase = wrap_phase(spec.cluster_phase_rad);
    for j in spec.indices(n) {
        phases[j] = phase;
        amplitudes[j] = spec.amplitude_gain;
    }
    Ok(TargetPattern {
        phases,
        amplitudes,
        label: None,
    })
}

/// Independent uniform phases, unit amplitudes.
pub fn make_asynchronous_target(seed: u64, params: &ModelParams) -> TargetPattern {
    TargetPattern {
        phases: background_phases(params.n_nodes, seed),
        amplitudes: vec![1.0; params.n_nodes],
        label: None,
    }
}

/// `I = D_lead^{-1}(chi) - x(t)`: adding `I` at `t` puts the network exactly
/// on `chi` at `t + lead`.
pub fn design_input(
    current: &NetworkState,
    target: &TargetPattern,
    lead_time_s: f64,
    prop: &Propagator,
) -> Result<InputVector> {
    if !(lead_time_s > 0.0 && lead_time_s.is_finite()) {
        return Err(CvnnError::invalid(format!(
            "lead time must be > 0, got {lead_time_s}"
        )));
    }
    if let Some(node) = target.amplitudes.iter().position(|a| !(*a > 0.0)) {
        return Err(CvnnError::UndefinedPhase { node });
    }
    if target.len() != current.len() {
        return Err(CvnnError::invalid("target and state sizes differ"));
    }
    let required = prop.evolve_inverse(&target.as_state(0.0), lead_time_s)?.state;
    let values = required
        .values
        .iter()
        .zip(&current.values)
        .map(|(r, x)| r - x)
        .collect();
    InputVector::new(values, current.time_s, lead_time_s)
}

/// Pure drive `D_lead^{-1}(pattern)` with no state subtracted. Its effect
/// superposes on whatever the network is doing.
pub fn design_drive(
    pattern: &[Complex64],
    apply_time_s: f64,
    lead_time_s: f64,
    prop: &Propagator,
) -> Result<InputVector> {
    let st = NetworkState::new(pattern.to_vec(), 0.0);
    let back = prop.evolve_inverse(&st, lead_time_s)?.state;
    InputVector::new(back.values, apply_time_s, lead_time_s)
}

pub fn apply_input(state: &NetworkState, input: &InputVector) -> Result<NetworkState> {
    if (state.time_s - input.apply_time_s).abs() > SCHEDULE_TOLERANCE_S {
        return Err(CvnnError::Scheduling {
            expected_s: input.apply_time_s,
            actual_s: state.time_s,
        });
    }
    if input.values.len() != state.len() {
        return Err(CvnnError::invalid("input and state sizes differ"));
    }
    let values = state
        .values
        .iter()
        .zip(&input.values)
        .map(|(x, i)| x + i)
        .collect();
    Ok(NetworkState::new(values, state.time_s))
}

/// `S = (1/N) |sum_j e^{i Arg chi_j} e^{-i Arg x_j}|`.
pub fn similarity(target: &TargetPattern, state: &NetworkState) -> Result<f64> {
    if target.len() != state.len() || target.is_empty() {
        return Err(CvnnError::invalid("target and state sizes differ"));
    }
    let phases = state.phases()?;
    let acc: Complex64 = target
        .phases
        .iter()
        .zip(&phases)
        .map(|(t, x)| Complex64::from_polar(1.0, t - x))
        .sum();
    Ok((acc.norm() / target.len() as f64).min(1.0))
}

/// The same measure restricted to a subset of nodes.
pub fn similarity_on(
    target: &TargetPattern,
    state: &NetworkState,
    nodes: impl IntoIterator<Item = usize>,
) -> Result<f64> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for j in nodes {
        let x = state.values[j];
        if x.re == 0.0 && x.im == 0.0 {
            return Err(CvnnError::UndefinedPhase { node: j });
        }
        acc += Complex64::from_polar(1.0, target.phases[j] - x.arg());
        count += 1;
    }
    if count == 0 {
        return Err(CvnnError::invalid("empty node set"));
    }
    Ok((acc.norm() / count as f64).min(1.0))
}

/// Uniform random initial state with unit amplitudes.
pub fn random_initial_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> NetworkState {
    NetworkState::random_phases(n, 0.0, rng)
}
