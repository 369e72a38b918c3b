//! Two-input logic gates read out by one decoder patch.
//!
//! Every gate input is a pure drive `D_lead^{-1}(pattern)`, so by linearity
//! the patch at decode time holds `D(x) + sum of the active patterns`:
//!
//! * XOR: patterns `+c` and `-c` for a strong cluster `c`. One input gives a
//!   coherent cluster, both cancel exactly.
//! * OR: both inputs carry `+c`.
//! * AND: patterns `c - b` and `c + b`, where `b` is a large incoherent
//!   scrambler on the patch. Either input alone is dominated by `b`; together
//!   the scramblers cancel and `2c` remains.
//!
//! NAND, NOR and XNOR negate the decoder output of AND, OR and XOR.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{advance, NoiseSettings};
use crate::decode::{local_order, DecoderPatch, DEFAULT_THRESHOLD};
use crate::error::{CvnnError, Result};
use crate::patterns::{apply_input, design_drive, InputVector, SCHEDULE_TOLERANCE_S};
use crate::propagator::Propagator;
use crate::seeding::rng_from;
use crate::state::{uniform_phase, NetworkState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Xor,
    Or,
    And,
    Nand,
    Nor,
    Xnor,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::Xor,
        GateKind::Or,
        GateKind::And,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xnor,
    ];

    /// Underlying construction and whether its output is negated.
    pub fn construction(self) -> (GateKind, bool) {
        match self {
            GateKind::Nand => (GateKind::And, true),
            GateKind::Nor => (GateKind::Or, true),
            GateKind::Xnor => (GateKind::Xor, true),
            g => (g, false),
        }
    }

    pub fn truth(self, x: bool, y: bool) -> bool {
        match self {
            GateKind::Xor => x ^ y,
            GateKind::Or => x | y,
            GateKind::And => x & y,
            GateKind::Nand => !(x & y),
            GateKind::Nor => !(x | y),
            GateKind::Xnor => !(x ^ y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Xor => "xor",
            GateKind::Or => "or",
            GateKind::And => "and",
            GateKind::Nand => "nand",
            GateKind::Nor => "nor",
            GateKind::Xnor => "xnor",
        }
    }
}

impl std::str::FromStr for GateKind {
    type Err = CvnnError;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|g| g.name() == s.to_ascii_lowercase())
            .ok_or_else(|| CvnnError::InvalidSpec(format!("unknown gate {s:?}")))
    }
}

/// Construction constants for the gate inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub gate: GateKind,
    pub output_patch: DecoderPatch,
    pub apply_time_s: f64,
    pub lead_time_s: f64,
    pub cluster_gain: f64,
    /// Amplitude of the random-phase filler outside the patch.
    pub background_amplitude: f64,
    /// Amplitude of the AND scrambler.
    pub scrambler_amplitude: f64,
    pub threshold: f64,
    pub pattern_seed: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            gate: GateKind::Xor,
            output_patch: DecoderPatch::new(128, 32),
            apply_time_s: 1.0,
            lead_time_s: 4.0,
            cluster_gain: 3.0,
            background_amplitude: 0.05,
            scrambler_amplitude: 10.0,
            threshold: DEFAULT_THRESHOLD,
            pattern_seed: 0x6a7e,
        }
    }
}

impl GateConfig {
    pub fn violations(&self, n: usize) -> Vec<String> {
        let mut v = Vec::new();
        if self.output_patch.width == 0 || self.output_patch.width >= n {
            v.push(format!("gate.output_patch.width must be in 1..{n}"));
        }
        if !(self.lead_time_s > 0.0) {
            v.push("gate.lead_time_s must be > 0".into());
        }
        if !(self.apply_time_s >= 0.0) {
            v.push("gate.apply_time_s must be >= 0".into());
        }
        if !(self.cluster_gain > 0.0) {
            v.push("gate.cluster_gain must be > 0".into());
        }
        if !(self.background_amplitude >= 0.0) {
            v.push("gate.background_amplitude must be >= 0".into());
        }
        if !(self.scrambler_amplitude >= 0.0) {
            v.push("gate.scrambler_amplitude must be >= 0".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            v.push("gate.threshold must lie in (0, 1)".into());
        }
        v
    }

    pub fn decode_time_s(&self) -> f64 {
        self.apply_time_s + self.lead_time_s
    }
}

/// A fully built gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub gate: GateKind,
    pub input_x: InputVector,
    pub input_y: InputVector,
    pub output_patch: DecoderPatch,
    pub decode_time_s: f64,
    pub threshold: f64,
    pub negate: bool,
}

impl GateSpec {
    pub fn validate(&self) -> Result<()> {
        if (self.input_x.apply_time_s - self.input_y.apply_time_s).abs() > SCHEDULE_TOLERANCE_S {
            return Err(CvnnError::InvalidSpec("gate inputs must share an apply time".into()));
        }
        if !(self.decode_time_s > self.input_x.apply_time_s) {
            return Err(CvnnError::InvalidSpec("decode time must follow the apply time".into()));
        }
        Ok(())
    }

    pub fn apply_time_s(&self) -> f64 {
        self.input_x.apply_time_s
    }

    /// The same gate with X and Y exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            input_x: self.input_y.clone(),
            input_y: self.input_x.clone(),
            ..self.clone()
        }
    }
}

/// Cluster of `gain` at `phase` on the patch, random phases of amplitude
/// `background` elsewhere.
pub fn cluster_drive(
    n: usize,
    patch: &DecoderPatch,
    gain: f64,
    phase: f64,
    background: f64,
    seed: u64,
) -> Vec<Complex64> {
    let mut rng = rng_from(seed, &[0xD41]);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::from_polar(background, uniform_phase(&mut rng)))
        .collect();
    for j in patch.indices(n) {
        v[j] = Complex64::from_polar(gain, phase);
    }
    v
}

fn scrambler(n: usize, patch: &DecoderPatch, amplitude: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = rng_from(seed, &[0x5C4]);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for j in patch.indices(n) {
        v[j] = Complex64::from_polar(amplitude, uniform_phase(&mut rng));
    }
    v
}

fn check_config(config: &GateConfig, prop: &Propagator) -> Result<()> {
    let v = config.violations(prop.n());
    if v.is_empty() {
        Ok(())
    } else {
        Err(CvnnError::InvalidSpec(v.join("; ")))
    }
}

/// XOR inputs with the Y cluster offset by `theta` relative to X (`pi` for
/// exact cancellation).
pub fn build_xor_inputs_with_offset(
    config: &GateConfig,
    prop: &Propagator,
    theta: f64,
) -> Result<(InputVector, InputVector)> {
    check_config(config, prop)?;
    let n = prop.n();
    let c = cluster_drive(
        n,
        &config.output_patch,
        config.cluster_gain,
        0.0,
        config.background_amplitude,
        config.pattern_seed,
    );
    let rot = Complex64::from_polar(1.0, theta);
    let cy: Vec<Complex64> = c.iter().map(|z| z * rot).collect();
    let ix = design_drive(&c, config.apply_time_s, config.lead_time_s, prop)?;
    let iy = design_drive(&cy, config.apply_time_s, config.lead_time_s, prop)?;
    Ok((ix, iy))
}

/// `I_X = D^{-1}(c)`, `I_Y = D^{-1}(-c)`.
pub fn build_xor_inputs(config: &GateConfig, prop: &Propagator) -> Result<(InputVector, InputVector)> {
    build_xor_inputs_with_offset(config, prop, PI)
}

pub fn build_gate_inputs(config: &GateConfig, prop: &Propagator) -> Result<GateSpec> {
    check_config(config, prop)?;
    let n = prop.n();
    let (base, negate) = config.gate.construction();
    let (input_x, input_y) = match base {
        GateKind::Xor => build_xor_inputs(config, prop)?,
        GateKind::Or => {
            let c = cluster_drive(
                n,
                &config.output_patch,
                config.cluster_gain,
                0.0,
                config.background_amplitude,
                config.pattern_seed,
            );
            let i = design_drive(&c, config.apply_time_s, config.lead_time_s, prop)?;
            (i.clone(), i)
        }
        GateKind::And => {
            let c = cluster_drive(
                n,
                &config.output_patch,
                config.cluster_gain,
                0.0,
                config.background_amplitude,
                config.pattern_seed,
            );
            let b = scrambler(n, &config.output_patch, config.scrambler_amplitude, config.pattern_seed);
            let minus: Vec<Complex64> = c.iter().zip(&b).map(|(c, b)| c - b).collect();
            let plus: Vec<Complex64> = c.iter().zip(&b).map(|(c, b)| c + b).collect();
            (
                design_drive(&minus, config.apply_time_s, config.lead_time_s, prop)?,
                design_drive(&plus, config.apply_time_s, config.lead_time_s, prop)?,
            )
        }
        _ => unreachable!("construction() returns a base gate"),
    };
    let spec = GateSpec {
        gate: config.gate,
        input_x,
        input_y,
        output_patch: config.output_patch,
        decode_time_s: config.decode_time_s(),
        threshold: config.threshold,
        negate,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateRun {
    pub x_on: bool,
    pub y_on: bool,
    pub output: bool,
    /// Local order of the output patch at decode time.
    pub order: f64,
}

/// Apply the selected inputs at the gate's apply time and read the output
/// patch at decode time. `initial` must not be later than the apply time.
pub fn run_gate(
    spec: &GateSpec,
    x_on: bool,
    y_on: bool,
    initial: &NetworkState,
    prop: &Propagator,
    noise: &NoiseSettings,
) -> Result<GateRun> {
    spec.validate()?;
    let t_apply = spec.apply_time_s();
    let before = t_apply - initial.time_s;
    if before < -SCHEDULE_TOLERANCE_S {
        return Err(CvnnError::Scheduling {
            expected_s: t_apply,
            actual_s: initial.time_s,
        });
    }
    let mut state = advance(prop, initial, before.max(0.0), &noise.fork(&[0]))?;
    state.time_s = t_apply;
    if x_on {
        state = apply_input(&state, &spec.input_x)?;
    }
    if y_on {
        state = apply_input(&state, &spec.input_y)?;
    }
    let end = advance(prop, &state, spec.decode_time_s - t_apply, &noise.fork(&[1]))?;
    let order = local_order(&end, &spec.output_patch)?;
    Ok(GateRun {
        x_on,
        y_on,
        output: (order >= spec.threshold) ^ spec.negate,
        order,
    })
}

/// Rows `(0,0), (1,0), (0,1), (1,1)`, each with its own noise stream.
pub fn truth_table(
    spec: &GateSpec,
    initial: &NetworkState,
    prop: &Propagator,
    noise: &NoiseSettings,
) -> Result<[GateRun; 4]> {
    let rows = [(false, false), (true, false), (false, true), (true, true)];
    let mut out = [GateRun {
        x_on: false,
        y_on: false,
        output: false,
        order: 0.0,
    }; 4];
    for (k, &(x, y)) in rows.iter().enumerate() {
        out[k] = run_gate(spec, x, y, initial, prop, &noise.fork(&[k as u64]))?;
    }
    Ok(out)
}

pub fn table_correct(gate: GateKind, table: &[GateRun; 4]) -> bool {
    table.iter().all(|r| r.output == gate.truth(r.x_on, r.y_on))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelParams;
    use crate::patterns::random_initial_state;

    fn setup(gate: GateKind) -> (Propagator, GateSpec) {
        let prop = Propagator::from_params(&ModelParams::default()).unwrap();
        let cfg = GateConfig {
            gate,
            ..Default::default()
        };
        let spec = build_gate_inputs(&cfg, &prop).unwrap();
        (prop, spec)
    }

    #[test]
    fn parse_names() {
        assert_eq!("XNOR".parse::<GateKind>().unwrap(), GateKind::Xnor);
        assert!("nope".parse::<GateKind>().is_err());
    }

    #[test]
    fn xor_table_for_a_few_seeds() {
        let (prop, spec) = setup(GateKind::Xor);
        for s in 0..5 {
            let x0 = random_initial_state(prop.n(), &mut rng_from(s, &[]));
            let t = truth_table(&spec, &x0, &prop, &NoiseSettings::none()).unwrap();
            assert!(table_correct(GateKind::Xor, &t), "seed {s}: {t:?}");
        }
    }

    #[test]
    fn xnor_is_complement_of_xor() {
        let (prop, xor) = setup(GateKind::Xor);
        let (_, xnor) = setup(GateKind::Xnor);
        let x0 = random_initial_state(prop.n(), &mut rng_from(9, &[]));
        let a = truth_table(&xor, &x0, &prop, &NoiseSettings::none()).unwrap();
        let b = truth_table(&xnor, &x0, &prop, &NoiseSettings::none()).unwrap();
        for (r, s) in a.iter().zip(&b) {
            assert_eq!(r.output, !s.output);
            assert_eq!(r.order, s.order);
        }
    }

    #[test]
    fn combined_xor_inputs_cancel() {
        let (_, spec) = setup(GateKind::Xor);
        let sum: Vec<Complex64> = spec
            .input_x
            .values
            .iter()
            .zip(&spec.input_y.values)
            .map(|(a, b)| a + b)
            .collect();
        let norm: f64 = sum.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 1e-12 * spec.input_x.input_norm);
    }

    #[test]
    fn mismatched_apply_times_rejected() {
        let (_, mut spec) = setup(GateKind::Or);
        spec.input_y.apply_time_s += 0.5;
        assert!(spec.validate().is_err());
    }
}
