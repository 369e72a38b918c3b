//! Run configuration: JSON file, dotted `key=value` overrides, validation.

use std::path::{Path, PathBuf};

use cvnn::crypto::{PublicParams, Schedule};
use cvnn::lif::{LifParams, DEFAULT_MIN_SPIKES};
use cvnn::patterns::ClusterSpec;
use cvnn::sweep::SweepConfig;
use cvnn::tasks::gates::GateConfig;
use cvnn::tasks::memory::{MemoryEvent, MemoryTask};
use cvnn::ModelParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Readout used for the `simulate` timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSettings {
    pub patch_width: usize,
    pub threshold: f64,
    pub persistence_window_s: f64,
}

impl Default for DecoderSettings {
    fn default() -> Self {
        Self {
            patch_width: 32,
            threshold: cvnn::decode::DEFAULT_THRESHOLD,
            persistence_window_s: cvnn::decode::DEFAULT_WINDOW_S,
        }
    }
}

/// Random start, a chimera placed at `target_time_s`, then a second input
/// at `release_time_s` that returns the network to asynchrony.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub cluster: ClusterSpec,
    pub first_input_s: f64,
    pub target_time_s: f64,
    pub release_time_s: f64,
    pub release_lead_s: f64,
    pub end_s: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            cluster: ClusterSpec::default(),
            first_input_s: 1.0,
            target_time_s: 4.0,
            release_time_s: 6.0,
            release_lead_s: 1.0,
            end_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateSection {
    pub params: GateConfig,
    /// Random initial states, one truth table each.
    pub trials: usize,
    /// Noise levels for the accuracy table (XOR only).
    pub noise_levels: Vec<f64>,
    /// When set, the noise level giving this per-node phase jitter at decode
    /// time is calibrated and added to `noise_levels`.
    pub jitter_target_rad: Option<f64>,
    pub noise_trials: usize,
}

impl Default for GateSection {
    fn default() -> Self {
        Self {
            params: GateConfig::default(),
            trials: 100,
            noise_levels: Vec::new(),
            jitter_target_rad: None,
            noise_trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySection {
    pub task: MemoryTask,
    /// Scenario run with the base seed and rendered.
    pub events: Vec<MemoryEvent>,
    pub end_s: f64,
    /// Seeds per item for the accuracy table; 0 skips it.
    pub seeds_per_item: usize,
}

impl Default for MemorySection {
    fn default() -> Self {
        Self {
            task: MemoryTask::default(),
            events: vec![MemoryEvent::Cue {
                item: 2,
                time_s: 1.0,
            }],
            end_s: 5.0,
            seeds_per_item: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryptoSection {
    pub public: PublicParams,
    pub schedule: Schedule,
    pub key_file: Option<PathBuf>,
    /// 32 hex digits; `keygen` derives material from the seed when absent.
    pub seed_material_hex: Option<String>,
    /// Write the expanded key form instead of the seed material.
    pub expanded_key: bool,
    pub message: Option<String>,
    pub message_file: Option<PathBuf>,
    pub ciphertext_file: Option<PathBuf>,
    pub attack_trials: usize,
    pub probe_lead_s: f64,
}

impl Default for CryptoSection {
    fn default() -> Self {
        Self {
            public: PublicParams::default(),
            schedule: Schedule::default(),
            key_file: None,
            seed_material_hex: None,
            expanded_key: false,
            message: None,
            message_file: None,
            ciphertext_file: None,
            attack_trials: 1000,
            probe_lead_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifSection {
    pub params: LifParams,
    /// Defaults to `params.current_gain`.
    pub gain: Option<f64>,
    pub task: MemoryTask,
    pub seeds: usize,
    pub min_spikes: usize,
}

impl Default for LifSection {
    fn default() -> Self {
        Self {
            params: LifParams::default(),
            gain: None,
            task: MemoryTask::default(),
            seeds: 20,
            min_spikes: DEFAULT_MIN_SPIKES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub decoder: DecoderSettings,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub sample_step_s: f64,
    /// Worker threads; `CVNN_WORKERS` takes precedence.
    pub workers: Option<usize>,
    pub simulate: SimulateSection,
    pub sweep: SweepConfig,
    pub gate: GateSection,
    pub memory: MemorySection,
    pub crypto: CryptoSection,
    pub lif: LifSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            decoder: DecoderSettings::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            sample_step_s: 0.01,
            workers: None,
            simulate: SimulateSection::default(),
            sweep: SweepConfig::default(),
            gate: GateSection::default(),
            memory: MemorySection::default(),
            crypto: CryptoSection::default(),
            lif: LifSection::default(),
        }
    }
}

/// Which section a command reads, for validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Simulate,
    Sweep,
    Gate,
    Memory,
    Crypto,
    Lif,
}

fn prefixed(prefix: &str, msgs: Vec<String>) -> impl Iterator<Item = String> + '_ {
    msgs.into_iter().map(move |m| format!("{prefix}: {m}"))
}

fn positive(v: &mut Vec<String>, name: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        v.push(format!("{name} must be > 0, got {x}"));
    }
}

impl RunConfig {
    /// Every problem with the sections `section` uses.
    pub fn violations(&self, section: Section) -> Vec<String> {
        let mut v = Vec::new();
        positive(&mut v, "sample_step_s", self.sample_step_s);
        if self.workers == Some(0) {
            v.push("workers must be >= 1".into());
        }
        let n = self.model.n_nodes;
        if section != Section::Crypto {
            v.extend(prefixed("model", self.model.violations()));
        }
        match section {
            Section::Simulate => {
                let s = &self.simulate;
                let d = &self.decoder;
                if d.patch_width == 0 || d.patch_width > n {
                    v.push(format!("decoder.patch_width must be in 1..={n}"));
                }
                if !(d.threshold > 0.0 && d.threshold < 1.0) {
                    v.push("decoder.threshold must lie in (0, 1)".into());
                }
                if !(d.persistence_window_s >= 0.0) {
                    v.push("decoder.persistence_window_s must be >= 0".into());
                }
                if let Err(e) = s.cluster.validate(n) {
                    v.push(format!("simulate.cluster: {e}"));
                }
                if !(s.first_input_s >= 0.0) {
                    v.push("simulate.first_input_s must be >= 0".into());
                }
                if !(s.target_time_s > s.first_input_s) {
                    v.push("simulate.target_time_s must follow first_input_s".into());
                }
                positive(&mut v, "simulate.release_lead_s", s.release_lead_s);
                if !(s.release_time_s >= s.target_time_s) {
                    v.push("simulate.release_time_s must not precede target_time_s".into());
                }
                if !(s.end_s >= s.release_time_s + s.release_lead_s) {
                    v.push("simulate.end_s must cover release_time_s + release_lead_s".into());
                }
            }
            Section::Sweep => v.extend(self.sweep.violations()),
            Section::Gate => {
                let g = &self.gate;
                v.extend(prefixed("gate.params", g.params.violations(n)));
                if g.trials == 0 {
                    v.push("gate.trials must be >= 1".into());
                }
                if g.noise_levels.iter().any(|s| !(*s >= 0.0)) {
                    v.push("gate.noise_levels must be >= 0".into());
                }
                let noisy = !g.noise_levels.is_empty() || g.jitter_target_rad.is_some();
                if noisy && g.params.gate != cvnn::tasks::gates::GateKind::Xor {
                    v.push("gate.noise_levels and gate.jitter_target_rad need gate.params.gate = xor".into());
                }
                if noisy && g.noise_trials == 0 {
                    v.push("gate.noise_trials must be >= 1".into());
                }
                if let Some(j) = g.jitter_target_rad {
                    if !(j > 0.0 && j < std::f64::consts::PI / 3f64.sqrt()) {
                        v.push("gate.jitter_target_rad must be in (0, pi/sqrt(3))".into());
                    }
                }
            }
            Section::Memory => {
                let m = &self.memory;
                v.extend(prefixed("memory.task", m.task.violations(n)));
                for (k, ev) in m.events.iter().enumerate() {
                    if !(ev.time_s() >= 0.0 && ev.time_s() <= m.end_s) {
                        v.push(format!("memory.events[{k}] time must be in [0, end_s]"));
                    }
                    if let MemoryEvent::Cue { item, .. } | MemoryEvent::Update { item, .. } = ev {
                        if *item >= m.task.n_items {
                            v.push(format!("memory.events[{k}] item {item} out of range"));
                        }
                    }
                }
                positive(&mut v, "memory.end_s", m.end_s);
            }
            Section::Crypto => {
                let c = &self.crypto;
                v.extend(prefixed("crypto.public", c.public.violations()));
                v.extend(prefixed("crypto.schedule", c.schedule.violations()));
                positive(&mut v, "crypto.probe_lead_s", c.probe_lead_s);
                if let Some(h) = &c.seed_material_hex {
                    if h.len() != 32 || !h.chars().all(|ch| ch.is_ascii_hexdigit()) {
                        v.push("crypto.seed_material_hex must be 32 hex digits".into());
                    }
                }
                if c.message.is_some() && c.message_file.is_some() {
                    v.push("crypto.message and crypto.message_file are exclusive".into());
                }
            }
            Section::Lif => {
                let l = &self.lif;
                if let Err(e) = l.params.validate() {
                    v.push(format!("lif.params: {e}"));
                }
                v.extend(prefixed("lif.task", l.task.violations(n)));
                if let Some(g) = l.gain {
                    if !(g >= 0.0 && g.is_finite()) {
                        v.push("lif.gain must be >= 0".into());
                    }
                }
                if l.seeds == 0 {
                    v.push("lif.seeds must be >= 1".into());
                }
            }
        }
        v
    }
}

/// Set `path` (dotted) inside `root`, creating nothing: every segment must
/// already exist in the default configuration or be an optional field.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let last = k + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if !map.contains_key(*part) {
                    return Err(format!("unknown key {path:?}"));
                }
                let slot = map.get_mut(*part).expect("checked above");
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| format!("{path:?}: {part:?} is not an index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| format!("{path:?}: index {idx} out of range (len {len})"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(format!("{path:?}: cannot descend into a scalar")),
        };
    }
    Err(format!("empty key in {path:?}"))
}

/// Parse an override value: JSON when it parses, otherwise a plain string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Defaults, then the optional file, then `key=value` overrides, then
/// `--seed`/`--out`. All override problems are reported together.
pub fn load(
    file: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<RunConfig, CliError> {
    let base = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?
        }
        None => RunConfig::default(),
    };
    let mut tree = serde_json::to_value(&base).expect("config serializes");
    let mut problems = Vec::new();
    for o in overrides {
        match o.split_once('=') {
            Some((k, v)) if !k.is_empty() => {
                if let Err(e) = set_path(&mut tree, k.trim(), parse_value(v)) {
                    problems.push(e);
                }
            }
            _ => problems.push(format!("override {o:?} is not key=value")),
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Config(problems));
    }
    let mut cfg: RunConfig =
        serde_json::from_value(tree).map_err(|e| CliError::Config(vec![format!("overrides: {e}")]))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o.to_path_buf();
    }
    Ok(cfg)
}

/// Reject the configuration if `section` has any violation.
pub fn validate(cfg: &RunConfig, section: Section) -> Result<(), CliError> {
    let v = cfg.violations(section);
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(v))
    }
}
