//! Nonlinear readout: local order parameter over patches, thresholding,
//! persistence filtering over a sampled trajectory, and patch currents.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CvnnError, Result};
use crate::network::ring_patch;
use crate::state::{NetworkState, Trajectory};

/// Default threshold `sigma`.
pub const DEFAULT_THRESHOLD: f64 = 0.8;
/// Default persistence window in seconds.
pub const DEFAULT_WINDOW_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderPatch {
    pub center: usize,
    pub width: usize,
}

impl DecoderPatch {
    pub fn new(center: usize, width: usize) -> Self {
        Self { center, width }
    }

    /// Patch covering nodes `start .. start + width`.
    pub fn starting_at(start: usize, width: usize) -> Self {
        Self::new(start + width / 2, width)
    }

    pub fn indices(&self, n: usize) -> impl Iterator<Item = usize> {
        ring_patch(self.center, self.width, n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.width == 0 || self.width > n {
            return Err(CvnnError::InvalidSpec(format!(
                "patch width must be in 1..={n}, got {}",
                self.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderBank {
    pub patches: Vec<DecoderPatch>,
    pub threshold: f64,
    pub persistence_window_s: f64,
}

impl DecoderBank {
    pub fn new(patches: Vec<DecoderPatch>, threshold: f64, persistence_window_s: f64) -> Result<Self> {
        if patches.is_empty() {
            return Err(CvnnError::InvalidSpec("decoder bank has no patches".into()));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(CvnnError::InvalidSpec(format!(
                "threshold must lie in (0, 1), got {threshold}"
            )));
        }
        if !(persistence_window_s >= 0.0 && persistence_window_s.is_finite()) {
            return Err(CvnnError::InvalidSpec(format!(
                "persistence window must be >= 0, got {persistence_window_s}"
            )));
        }
        Ok(Self {
            patches,
            threshold,
            persistence_window_s,
        })
    }

    /// `count` contiguous patches of `width` nodes, the k-th starting at
    /// node `k * (n / count)`.
    pub fn evenly_spaced(
        n: usize,
        count: usize,
        width: usize,
        threshold: f64,
        persistence_window_s: f64,
    ) -> Result<Self> {
        if count == 0 || width == 0 || count > n {
            return Err(CvnnError::InvalidSpec(format!(
                "cannot place {count} patches of width {width} on {n} nodes"
            )));
        }
        let spacing = n / count;
        let patches = (0..count)
            .map(|k| DecoderPatch::starting_at(k * spacing, width))
            .collect();
        Self::new(patches, threshold, persistence_window_s)
    }

    /// `n / width` disjoint patches tiling the ring, default threshold and
    /// window.
    pub fn tiling(n: usize, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(CvnnError::InvalidSpec("patch width must be > 0".into()));
        }
        Self::evenly_spaced(n, n / width, width, DEFAULT_THRESHOLD, DEFAULT_WINDOW_S)
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.threshold = threshold;
        Self::new(self.patches, self.threshold, self.persistence_window_s)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        Self::new(self.patches.clone(), self.threshold, self.persistence_window_s)?;
        self.patches.iter().try_for_each(|p| p.validate(n))
    }
}

/// Local Kuramoto order parameter `|mean_j e^{i Arg x_j}|` over the patch.
pub fn local_order_values(values: &[Complex64], patch: &DecoderPatch) -> Result<f64> {
    let n = values.len();
    patch.validate(n)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in patch.indices(n) {
        let z = values[j];
        let r = z.norm();
        if r == 0.0 {
            return Err(CvnnError::UndefinedPhase { node: j });
        }
        acc += z / r;
    }
    Ok((acc.norm() / patch.width as f64).min(1.0))
}

pub fn local_order(state: &NetworkState, patch: &DecoderPatch) -> Result<f64> {
    local_order_values(&state.values, patch)
}

/// Order parameter over all nodes.
pub fn global_order(values: &[Complex64]) -> Result<f64> {
    local_order_values(values, &DecoderPatch::starting_at(0, values.len()))
}

/// `o_k = [R_k >= sigma]`.
pub fn readout(state: &NetworkState, bank: &DecoderBank) -> Result<Vec<bool>> {
    bank.patches
        .iter()
        .map(|p| local_order(state, p).map(|r| r >= bank.threshold))
        .collect()
}

/// One persistent activation of a decoder unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub unit: usize,
    pub onset_s: f64,
    pub offset_s: f64,
}

impl Activation {
    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

/// Order parameters per sample (rows) and unit (columns).
pub fn order_matrix(trajectory: &Trajectory, bank: &DecoderBank) -> Result<Vec<Vec<f64>>> {
    trajectory
        .states
        .iter()
        .map(|s| {
            bank.patches
                .iter()
                .map(|p| local_order_values(s, p))
                .collect()
        })
        .collect()
}

/// Intervals where `R_k >= sigma` holds on consecutive samples for at least
/// the persistence window. A run starting at sample `a` and ending before
/// sample `b` spans `[t_a, t_b)`; a run reaching the end closes at
/// `t_last + dt`. Sorted by onset, then unit.
pub fn decode_timeline(trajectory: &Trajectory, bank: &DecoderBank) -> Result<Vec<Activation>> {
    let dt = trajectory.step()?;
    let orders = order_matrix(trajectory, bank)?;
    let times = &trajectory.times;
    let end = times[times.len() - 1] + dt;
    let mut out = Vec::new();
    for unit in 0..bank.len() {
        let mut start: Option<usize> = None;
        for (i, row) in orders.iter().enumerate() {
            let on = row[unit] >= bank.threshold;
            match (on, start) {
                (true, None) => start = Some(i),
                (false, Some(a)) => {
                    push_run(&mut out, unit, times[a], times[i], bank.persistence_window_s);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(a) = start {
            push_run(&mut out, unit, times[a], end, bank.persistence_window_s);
        }
    }
    out.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.unit.cmp(&b.unit)));
    Ok(out)
}

fn push_run(out: &mut Vec<Activation>, unit: usize, onset_s: f64, offset_s: f64, window: f64) {
    if offset_s - onset_s >= window - 1e-9 {
        out.push(Activation {
            unit,
            onset_s,
            offset_s,
        });
    }
}

/// Sampled real-valued signal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

/// `c(t) = gain * sum_{j in patch} cos(Arg x_j(t))`.
pub fn patch_current(trajectory: &Trajectory, patch: &DecoderPatch, gain: f64) -> Result<TimeSeries> {
    trajectory.step()?;
    let mut values = Vec::with_capacity(trajectory.len());
    for s in &trajectory.states {
        patch.validate(s.len())?;
        let mut acc = 0.0;
        for j in patch.indices(s.len()) {
            let r = s[j].norm();
            if r == 0.0 {
                return Err(CvnnError::UndefinedPhase { node: j });
            }
            acc += s[j].re / r;
        }
        values.push(gain * acc);
    }
    Ok(TimeSeries {
        times: trajectory.times.clone(),
        values,
    })
}

pub fn write_timeline_csv<W: Write>(mut w: W, timeline: &[Activation]) -> Result<()> {
    writeln!(w, "unit,onset_s,offset_s")?;
    for a in timeline {
        writeln!(w, "{},{},{}", a.unit, a.onset_s, a.offset_s)?;
    }
    Ok(())
}

pub fn write_spikes_csv<W: Write>(mut w: W, spike_times_s: &[f64]) -> Result<()> {
    writeln!(w, "spike_time_s")?;
    for t in spike_times_s {
        writeln!(w, "{t}")?;
    }
    Ok(())
}

pub fn write_current_csv<W: Write>(mut w: W, current: &TimeSeries) -> Result<()> {
    writeln!(w, "time_s,current")?;
    for (t, c) in current.times.iter().zip(&current.values) {
        writeln!(w, "{t},{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;
    use std::f64::consts::{PI, TAU};

    fn sync_state(n: usize, phase: f64) -> NetworkState {
        NetworkState::new(vec![Complex64::from_polar(1.0, phase); n], 0.0)
    }

    #[test]
    fn synchronized_patch_is_one() {
        let st = sync_state(64, 0.3);
        let r = local_order(&st, &DecoderPatch::new(10, 32)).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antiphase_halves_cancel() {
        let mut st = sync_state(64, 0.0);
        for j in 0..16 {
            st.values[j] = -st.values[j];
        }
        let r = local_order(&st, &DecoderPatch::starting_at(0, 32)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn random_patch_matches_rayleigh_mean() {
        let trials = 4000;
        let mean: f64 = (0..trials)
            .map(|s| {
                let st = NetworkState::random_phases(32, 0.0, &mut rng_from(s, &[1]));
                local_order(&st, &DecoderPatch::starting_at(0, 32)).unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        let expect = (PI / (4.0 * 32.0)).sqrt();
        assert!((mean - expect).abs() < 0.05 * expect, "{mean}");
    }

    #[test]
    fn zero_amplitude_rejected() {
        let mut st = sync_state(8, 0.0);
        st.values[1] = Complex64::default();
        assert!(matches!(
            local_order(&st, &DecoderPatch::starting_at(0, 4)),
            Err(CvnnError::UndefinedPhase { node: 1 })
        ));
    }

    #[test]
    fn readout_sync_and_async() {
        let bank = DecoderBank::tiling(256, 32).unwrap();
        assert_eq!(bank.len(), 8);
        assert!(readout(&sync_state(256, 1.0), &bank)
            .unwrap()
            .iter()
            .all(|&b| b));
        let bank = bank.with_threshold(0.9).unwrap();
        let mut fires = 0;
        for s in 0..1000 {
            let st = NetworkState::random_phases(256, 0.0, &mut rng_from(s, &[2]));
            fires += readout(&st, &bank).unwrap().iter().filter(|&&b| b).count();
        }
        assert_eq!(fires, 0);
    }

    #[test]
    fn bank_validation() {
        assert!(DecoderBank::new(vec![], 0.5, 0.1).is_err());
        assert!(DecoderBank::new(vec![DecoderPatch::new(0, 4)], 1.0, 0.1).is_err());
        assert!(DecoderBank::new(vec![DecoderPatch::new(0, 4)], 0.0, 0.1).is_err());
        assert!(DecoderBank::new(vec![DecoderPatch::new(0, 4)], 0.5, -1.0).is_err());
    }

    fn trajectory_with_cluster(on_from: f64, on_to: f64, total: f64, dt: f64) -> Trajectory {
        let n = 64;
        let mut rng = rng_from(3, &[]);
        let mut tr = Trajectory::default();
        let count = (total / dt).round() as usize;
        for k in 0..count {
            let t = k as f64 * dt;
            let mut st = NetworkState::random_phases(n, t, &mut rng);
            if t >= on_from - 1e-12 && t < on_to - 1e-12 {
                for j in 32..48 {
                    st.values[j] = Complex64::from_polar(1.0, TAU * 10.0 * t);
                }
            }
            tr.push(t, st.values);
        }
        tr
    }

    #[test]
    fn persistent_cluster_one_interval() {
        let tr = trajectory_with_cluster(1.0, 4.0, 5.0, 0.01);
        let bank = DecoderBank::tiling(64, 16).unwrap();
        let tl = decode_timeline(&tr, &bank).unwrap();
        assert_eq!(tl.len(), 1);
        assert_eq!(tl[0].unit, 2);
        assert!((tl[0].duration_s() - 3.0).abs() < 0.011);
    }

    #[test]
    fn short_blip_filtered() {
        let tr = trajectory_with_cluster(1.0, 1.05, 2.0, 0.001);
        let bank = DecoderBank::tiling(64, 16).unwrap();
        assert!(decode_timeline(&tr, &bank).unwrap().is_empty());
    }

    #[test]
    fn empty_trajectory_rejected() {
        let bank = DecoderBank::tiling(64, 16).unwrap();
        assert!(matches!(
            decode_timeline(&Trajectory::default(), &bank),
            Err(CvnnError::EmptyTrajectory)
        ));
    }

    #[test]
    fn coherent_current_is_full_sinusoid() {
        let mut tr = Trajectory::default();
        for k in 0..100 {
            let t = k as f64 * 1e-3;
            tr.push(t, vec![Complex64::from_polar(2.0, TAU * 10.0 * t); 16]);
        }
        let c = patch_current(&tr, &DecoderPatch::starting_at(0, 16), 0.5).unwrap();
        for (t, v) in c.times.iter().zip(&c.values) {
            assert!((v - 8.0 * (TAU * 10.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn incoherent_current_rms() {
        let mut rng = rng_from(5, &[]);
        let mut tr = Trajectory::default();
        for k in 0..4000 {
            tr.push(k as f64 * 1e-3, NetworkState::random_phases(32, 0.0, &mut rng).values);
        }
        let c = patch_current(&tr, &DecoderPatch::starting_at(0, 32), 1.0).unwrap();
        let expect = (32.0f64 / 2.0).sqrt();
        assert!((c.rms() - expect).abs() < 0.05 * expect, "{}", c.rms());
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_timeline_csv(
            &mut buf,
            &[Activation {
                unit: 2,
                onset_s: 1.0,
                offset_s: 4.5,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "unit,onset_s,offset_s\n2,1,4.5\n");
    }
}
