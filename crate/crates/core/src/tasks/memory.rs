//! Short-term memory: one of `n_items` cluster positions is held, updated
//! online or erased by designed inputs.

use serde::{Deserialize, Serialize};

use super::{run_segment, NoiseSettings};
use crate::decode::{
    decode_timeline, global_order, order_matrix, Activation, DecoderBank, DecoderPatch,
    DEFAULT_THRESHOLD, DEFAULT_WINDOW_S,
};
use crate::error::{CvnnError, Result};
use crate::lif::{lif_decode, LifDecision, LifParams};
use crate::patterns::{
    apply_input, design_input, make_asynchronous_target, make_cluster_target,
    random_initial_state, ClusterSpec, InputVector,
};
use crate::propagator::Propagator;
use crate::seeding::{derive_seed, rng_from};
use crate::state::{NetworkState, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryTask {
    pub n_items: usize,
    pub item_patches: Vec<DecoderPatch>,
    pub cue_time_s: f64,
    pub cue_lead_s: f64,
    pub hold_s: f64,
    pub amplitude_gain: f64,
    pub threshold: f64,
    pub persistence_window_s: f64,
    pub sample_step_s: f64,
}

impl Default for MemoryTask {
    fn default() -> Self {
        Self::tiling(256, 8)
    }
}

impl MemoryTask {
    /// `n_items` disjoint patches of width `n / n_items` tiling the ring.
    pub fn tiling(n: usize, n_items: usize) -> Self {
        let width = n / n_items.max(1);
        Self {
            n_items,
            item_patches: (0..n_items)
                .map(|k| DecoderPatch::starting_at(k * width, width))
                .collect(),
            cue_time_s: 1.0,
            cue_lead_s: 1.0,
            hold_s: 3.0,
            amplitude_gain: 3.0,
            threshold: DEFAULT_THRESHOLD,
            persistence_window_s: DEFAULT_WINDOW_S,
            sample_step_s: 0.01,
        }
    }

    /// Time at which a cued item first appears.
    pub fn target_time_s(&self) -> f64 {
        self.cue_time_s + self.cue_lead_s
    }

    pub fn violations(&self, n: usize) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_items == 0 || self.item_patches.len() != self.n_items {
            v.push("memory.item_patches must hold n_items patches".to_string());
        }
        let mut used = vec![false; n];
        let mut total = 0;
        for p in &self.item_patches {
            if p.width == 0 || p.width > n {
                v.push(format!("memory patch width {} out of range", p.width));
                continue;
            }
            total += p.width;
            for j in p.indices(n) {
                if std::mem::replace(&mut used[j], true) {
                    v.push(format!("memory patches overlap at node {j}"));
                    break;
                }
            }
        }
        if total > n {
            v.push("memory patches need more nodes than the network has".to_string());
        }
        for (name, x) in [
            ("cue_lead_s", self.cue_lead_s),
            ("hold_s", self.hold_s),
            ("amplitude_gain", self.amplitude_gain),
            ("sample_step_s", self.sample_step_s),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("memory.{name} must be > 0"));
            }
        }
        if !(self.cue_time_s >= 0.0) {
            v.push("memory.cue_time_s must be >= 0".to_string());
        }
        if self.sample_step_s > 0.01 + 1e-12 {
            v.push("memory.sample_step_s must be <= 0.01".to_string());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            v.push("memory.threshold must lie in (0, 1)".to_string());
        }
        v
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let v = self.violations(n);
        if v.is_empty() {
            Ok(())
        } else {
            Err(CvnnError::InvalidSpec(v.join("; ")))
        }
    }

    pub fn bank(&self) -> Result<DecoderBank> {
        DecoderBank::new(
            self.item_patches.clone(),
            self.threshold,
            self.persistence_window_s,
        )
    }

    fn item_spec(&self, item: usize, seed: u64) -> Result<ClusterSpec> {
        let patch = self
            .item_patches
            .get(item)
            .ok_or_else(|| CvnnError::InvalidSpec(format!("item {item} out of range")))?;
        Ok(ClusterSpec::new(patch.center, patch.width)
            .with_gain(self.amplitude_gain)
            .with_seed(seed))
    }
}

/// Input that places item `item` at `state.time + cue_lead`.
pub fn memory_cue(
    state: &NetworkState,
    item: usize,
    task: &MemoryTask,
    prop: &Propagator,
    background_seed: u64,
) -> Result<InputVector> {
    task.validate(prop.n())?;
    let chi = make_cluster_target(&task.item_spec(item, background_seed)?, prop.params())?;
    design_input(state, &chi, task.cue_lead_s, prop)
}

/// Move the held item to `new_item`. Uses only the present state.
pub fn memory_update(
    state_now: &NetworkState,
    new_item: usize,
    task: &MemoryTask,
    prop: &Propagator,
    background_seed: u64,
) -> Result<InputVector> {
    memory_cue(state_now, new_item, task, prop, background_seed)
}

/// Input that returns the network to an asynchronous pattern.
pub fn memory_erase(
    state_now: &NetworkState,
    task: &MemoryTask,
    prop: &Propagator,
    seed: u64,
) -> Result<InputVector> {
    if state_now.norm() == 0.0 {
        return Err(CvnnError::UndefinedPhase { node: 0 });
    }
    let chi = make_asynchronous_target(seed, prop.params());
    design_input(state_now, &chi, task.cue_lead_s, prop)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MemoryEvent {
    Cue { item: usize, time_s: f64 },
    Update { item: usize, time_s: f64 },
    Erase { time_s: f64 },
}

impl MemoryEvent {
    pub fn time_s(&self) -> f64 {
        match *self {
            MemoryEvent::Cue { time_s, .. }
            | MemoryEvent::Update { time_s, .. }
            | MemoryEvent::Erase { time_s } => time_s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MemoryRun {
    pub trajectory: Trajectory,
    pub timeline: Vec<Activation>,
    /// Order parameter per sample and item patch.
    pub orders: Vec<Vec<f64>>,
    pub final_state: NetworkState,
    pub inputs: Vec<InputVector>,
}

impl MemoryRun {
    fn sample_range(&self, from_s: f64, to_s: f64) -> impl Iterator<Item = usize> + '_ {
        self.trajectory
            .times
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t >= from_s - 1e-9 && t < to_s - 1e-9)
            .map(|(k, _)| k)
    }

    /// Units whose order is at or above `threshold` at sample `k`.
    pub fn active_at(&self, k: usize, threshold: f64) -> Vec<usize> {
        self.orders[k]
            .iter()
            .enumerate()
            .filter(|(_, &r)| r >= threshold)
            .map(|(u, _)| u)
            .collect()
    }

    /// True when `item` is the one and only active unit at every sample in
    /// `[from, to)`.
    pub fn uniquely_active(&self, item: usize, from_s: f64, to_s: f64, threshold: f64) -> bool {
        let mut any = false;
        for k in self.sample_range(from_s, to_s) {
            any = true;
            if self.active_at(k, threshold) != [item] {
                return false;
            }
        }
        any
    }

    /// True when no unit is active at any sample in `[from, to)`.
    pub fn silent(&self, from_s: f64, to_s: f64, threshold: f64) -> bool {
        self.sample_range(from_s, to_s)
            .all(|k| self.active_at(k, threshold).is_empty())
    }

    /// Total time in `[from, to)` during which units `a` and `b` are both
    /// active.
    pub fn overlap_s(&self, a: usize, b: usize, from_s: f64, to_s: f64, threshold: f64) -> f64 {
        let dt = self.trajectory.step().unwrap_or(0.0);
        self.sample_range(from_s, to_s)
            .filter(|&k| self.orders[k][a] >= threshold && self.orders[k][b] >= threshold)
            .count() as f64
            * dt
    }
}

/// Random start at `t = 0`, then the events in time order, then a free run
/// up to `end_s`. Inputs are designed from the state the network actually
/// has at each event time.
pub fn run_memory_schedule(
    task: &MemoryTask,
    prop: &Propagator,
    events: &[MemoryEvent],
    end_s: f64,
    seed: u64,
    noise: &NoiseSettings,
) -> Result<MemoryRun> {
    task.validate(prop.n())?;
    let mut events = events.to_vec();
    events.sort_by(|a, b| a.time_s().total_cmp(&b.time_s()));
    if let Some(last) = events.last() {
        if last.time_s() > end_s {
            return Err(CvnnError::InvalidSpec("event after end of run".into()));
        }
    }
    let mut state = random_initial_state(prop.n(), &mut rng_from(seed, &[0]));
    let mut trajectory = Trajectory::default();
    let mut inputs = Vec::new();
    for (k, ev) in events.iter().enumerate() {
        let (seg, mut next) = run_segment(
            prop,
            &state,
            ev.time_s() - state.time_s,
            task.sample_step_s,
            &noise.fork(&[k as u64]),
        )?;
        trajectory.extend(seg);
        next.time_s = ev.time_s();
        let pattern_seed = derive_seed(seed, &[1, k as u64]);
        let input = match *ev {
            MemoryEvent::Cue { item, .. } => memory_cue(&next, item, task, prop, pattern_seed)?,
            MemoryEvent::Update { item, .. } => {
                memory_update(&next, item, task, prop, pattern_seed)?
            }
            MemoryEvent::Erase { .. } => memory_erase(&next, task, prop, pattern_seed)?,
        };
        state = apply_input(&next, &input)?;
        inputs.push(input);
    }
    let (seg, mut end) = run_segment(
        prop,
        &state,
        end_s - state.time_s,
        task.sample_step_s,
        &noise.fork(&[events.len() as u64]),
    )?;
    trajectory.extend(seg);
    end.time_s = end_s;
    let bank = task.bank()?;
    let timeline = decode_timeline(&trajectory, &bank)?;
    let orders = order_matrix(&trajectory, &bank)?;
    Ok(MemoryRun {
        trajectory,
        timeline,
        orders,
        final_state: end,
        inputs,
    })
}

/// Cue `item` and hold it; true when it is the unique active unit for the
/// whole hold.
pub fn run_item_trial(
    task: &MemoryTask,
    prop: &Propagator,
    item: usize,
    seed: u64,
    noise: &NoiseSettings,
) -> Result<(bool, MemoryRun)> {
    let tau = task.target_time_s();
    let end = tau + task.hold_s;
    let run = run_memory_schedule(
        task,
        prop,
        &[MemoryEvent::Cue {
            item,
            time_s: task.cue_time_s,
        }],
        end,
        seed,
        noise,
    )?;
    let ok = run.uniquely_active(item, tau, end, task.threshold);
    Ok((ok, run))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub from_item: usize,
    pub to_item: usize,
    pub update_time_s: f64,
    pub crossover_s: f64,
    /// `from_item` uniquely active between its target time and the update.
    pub before_ok: bool,
    /// `to_item` uniquely active from the end of the crossover allowance.
    pub after_ok: bool,
}

/// Cue `from`, switch to `to` at `update_time_s`, watch until `end_s`.
#[allow(clippy::too_many_arguments)]
pub fn run_update_trial(
    task: &MemoryTask,
    prop: &Propagator,
    from: usize,
    to: usize,
    update_time_s: f64,
    end_s: f64,
    crossover_allowance_s: f64,
    seed: u64,
) -> Result<(UpdateReport, MemoryRun)> {
    let run = run_memory_schedule(
        task,
        prop,
        &[
            MemoryEvent::Cue {
                item: from,
                time_s: task.cue_time_s,
            },
            MemoryEvent::Update {
                item: to,
                time_s: update_time_s,
            },
        ],
        end_s,
        seed,
        &NoiseSettings::none(),
    )?;
    let sigma = task.threshold;
    let crossover_s = if from == to {
        0.0
    } else {
        run.overlap_s(from, to, task.target_time_s(), end_s, sigma)
    };
    let report = UpdateReport {
        from_item: from,
        to_item: to,
        update_time_s,
        crossover_s,
        before_ok: run.uniquely_active(from, task.target_time_s(), update_time_s, sigma),
        after_ok: run.uniquely_active(to, update_time_s + crossover_allowance_s, end_s, sigma),
    };
    Ok((report, run))
}

/// Collapse an activation timeline to the sequence of distinct units by
/// onset, merging consecutive repeats.
pub fn unit_sequence(timeline: &[Activation]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for a in timeline {
        if out.last() != Some(&a.unit) {
            out.push(a.unit);
        }
    }
    out
}

/// Cue `items[0]`, then update to each following item every `dwell_s`.
/// Returns whether the decoded unit sequence equals `items` with
/// consecutive repeats merged.
pub fn run_sequence_trial(
    task: &MemoryTask,
    prop: &Propagator,
    items: &[usize],
    dwell_s: f64,
    seed: u64,
) -> Result<(bool, MemoryRun)> {
    if items.is_empty() {
        return Err(CvnnError::InvalidSpec("empty item sequence".into()));
    }
    let mut events = vec![MemoryEvent::Cue {
        item: items[0],
        time_s: task.cue_time_s,
    }];
    let first = task.target_time_s();
    for (k, &item) in items.iter().enumerate().skip(1) {
        events.push(MemoryEvent::Update {
            item,
            time_s: first + k as f64 * dwell_s,
        });
    }
    let end = first + items.len() as f64 * dwell_s;
    let run = run_memory_schedule(task, prop, &events, end, seed, &NoiseSettings::none())?;
    let mut expect: Vec<usize> = items.to_vec();
    expect.dedup();
    Ok((unit_sequence(&run.timeline) == expect, run))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraseReport {
    pub erase_time_s: f64,
    pub silent: bool,
    pub global_order_after: f64,
}

/// Cue `item`, erase at the end of the hold and watch `watch_s` seconds.
pub fn run_erase_trial(
    task: &MemoryTask,
    prop: &Propagator,
    item: usize,
    erase_time_s: f64,
    watch_s: f64,
    seed: u64,
) -> Result<(EraseReport, MemoryRun)> {
    let end = erase_time_s + watch_s;
    let run = run_memory_schedule(
        task,
        prop,
        &[
            MemoryEvent::Cue {
                item,
                time_s: task.cue_time_s,
            },
            MemoryEvent::Erase {
                time_s: erase_time_s,
            },
        ],
        end,
        seed,
        &NoiseSettings::none(),
    )?;
    let tau_erase = erase_time_s + task.cue_lead_s;
    let probe = run
        .trajectory
        .times
        .iter()
        .position(|&t| t >= tau_erase - 1e-9)
        .unwrap_or(run.trajectory.len() - 1);
    let report = EraseReport {
        erase_time_s,
        silent: run.silent(erase_time_s, end, task.threshold),
        global_order_after: global_order(&run.trajectory.states[probe])?,
    };
    Ok((report, run))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifTrial {
    pub item: usize,
    pub seed: u64,
    /// Per patch: LIF decision.
    pub fired: Vec<bool>,
    pub spike_counts: Vec<usize>,
    /// Per patch: threshold readout held over the whole window.
    pub readout: Vec<bool>,
}

impl LifTrial {
    pub fn correct(&self) -> bool {
        self.fired
            .iter()
            .enumerate()
            .all(|(k, &f)| f == (k == self.item))
    }
}

/// Cue `item`, then drive one LIF neuron per item patch with the patch
/// current over the hold window, sampled at 1 ms. A patch counts as fired
/// with at least `min_spikes` spikes.
pub fn run_lif_trial(
    task: &MemoryTask,
    prop: &Propagator,
    lif: &LifParams,
    gain: f64,
    min_spikes: usize,
    item: usize,
    seed: u64,
) -> Result<(LifTrial, Vec<LifDecision>)> {
    task.validate(prop.n())?;
    let x0 = random_initial_state(prop.n(), &mut rng_from(seed, &[0]));
    let at_cue = prop.evolve(&x0, task.cue_time_s)?;
    let input = memory_cue(&at_cue, item, task, prop, derive_seed(seed, &[1, 0]))?;
    let start = apply_input(&at_cue, &input)?;
    let at_target = prop.evolve(&start, task.cue_lead_s)?;
    let step = 1e-3;
    let count = (task.hold_s / step).round() as usize + 1;
    let tr = prop.sample(&at_target, count, step)?;
    let mut decisions = Vec::with_capacity(task.n_items);
    let mut readout = Vec::with_capacity(task.n_items);
    for patch in &task.item_patches {
        decisions.push(lif_decode(&tr, patch, lif, gain, min_spikes)?);
        let mut held = true;
        for s in &tr.states {
            if crate::decode::local_order_values(s, patch)? < task.threshold {
                held = false;
                break;
            }
        }
        readout.push(held);
    }
    let trial = LifTrial {
        item,
        seed,
        fired: decisions.iter().map(|d| d.fired).collect(),
        spike_counts: decisions.iter().map(|d| d.spikes.len()).collect(),
        readout,
    };
    Ok((trial, decisions))
}
