//! Chimera-alphabet message protocol.
//!
//! Each letter is a cluster position on the ring. Bob knows the recipient's
//! secret frequency and initial state, simulates her network, and for every
//! letter designs the input that makes the letter's cluster appear one lead
//! time after it is applied. The ciphertext is the list of inputs and their
//! apply times. Alice replays it on her own network and reads the letters
//! with a decoder bank.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decode::{
    decode_timeline, local_order_values, DecoderBank, DecoderPatch, DEFAULT_THRESHOLD,
    DEFAULT_WINDOW_S,
};
use crate::error::{CvnnError, Result};
use crate::network::ModelParams;
use crate::patterns::{
    apply_input, design_input, make_cluster_target, ClusterSpec, InputVector,
};
use crate::propagator::Propagator;
use crate::seeding::{derive_seed, rng_from};
use crate::state::{NetworkState, Trajectory};

pub const LETTERS: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ ";
pub const PROTOCOL_VERSION: u32 = 1;
/// Range of key frequencies in Hz.
pub const KEY_FREQUENCY_HZ: (f64, f64) = (8.0, 12.0);
/// Range of key initial-state amplitudes.
pub const KEY_AMPLITUDE: (f64, f64) = (0.5, 1.5);
/// Onsets closer than this are reported as simultaneous.
const SIMULTANEOUS_S: f64 = 0.01;

/// Public constants shared by everyone, including an eavesdropper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PublicParams {
    /// Network constants; the frequency field is replaced by the key's.
    pub model: ModelParams,
    pub letter_width: usize,
    pub cluster_gain: f64,
    /// Scale of every letter target relative to a unit background.
    pub target_scale: f64,
    pub threshold: f64,
    pub persistence_window_s: f64,
    pub sample_step_s: f64,
    /// How long Alice watches after the last input.
    pub decode_tail_s: f64,
    /// Bob requires every non-target unit to stay this far below threshold.
    pub render_margin: f64,
    pub max_render_attempts: u32,
}

impl Default for PublicParams {
    fn default() -> Self {
        Self {
            model: ModelParams::default().with_phase_delay(FRAC_PI_2 - 0.1),
            letter_width: 8,
            cluster_gain: 3.0,
            target_scale: 0.1,
            threshold: DEFAULT_THRESHOLD,
            persistence_window_s: DEFAULT_WINDOW_S,
            sample_step_s: 0.01,
            decode_tail_s: 1.0,
            render_margin: 0.1,
            max_render_attempts: 64,
        }
    }
}

impl PublicParams {
    pub fn n(&self) -> usize {
        self.model.n_nodes
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .model
            .violations()
            .into_iter()
            .map(|m| format!("crypto.model: {m}"))
            .collect();
        let n = self.n();
        let spacing = n / LETTERS.len();
        if self.letter_width == 0 || spacing < self.letter_width {
            v.push(format!(
                "crypto: {n} nodes cannot hold 27 letters of width {} (need n >= {})",
                self.letter_width,
                27 * self.letter_width.max(1)
            ));
        }
        for (name, x) in [
            ("cluster_gain", self.cluster_gain),
            ("target_scale", self.target_scale),
            ("sample_step_s", self.sample_step_s),
            ("decode_tail_s", self.decode_tail_s),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("crypto.{name} must be > 0"));
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            v.push("crypto.threshold must lie in (0, 1)".into());
        }
        if !(self.render_margin >= 0.0 && self.render_margin < self.threshold) {
            v.push("crypto.render_margin must lie in [0, threshold)".into());
        }
        if self.max_render_attempts == 0 {
            v.push("crypto.max_render_attempts must be >= 1".into());
        }
        v
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    pub entries: Vec<(char, ClusterSpec)>,
}

impl Alphabet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, c: char) -> Result<usize> {
        let up = c.to_ascii_uppercase();
        self.entries
            .iter()
            .position(|(l, _)| *l == up)
            .ok_or(CvnnError::UnknownCharacter(c))
    }

    pub fn letter(&self, k: usize) -> char {
        self.entries[k].0
    }

    pub fn patches(&self) -> Vec<DecoderPatch> {
        self.entries
            .iter()
            .map(|(_, s)| DecoderPatch::new(s.center, s.width))
            .collect()
    }

    pub fn bank(&self, public: &PublicParams) -> Result<DecoderBank> {
        DecoderBank::new(self.patches(), public.threshold, public.persistence_window_s)
    }
}

/// 27 clusters of `letter_width` nodes, the k-th starting at node
/// `k * floor(N / 27)`.
pub fn build_alphabet(public: &PublicParams) -> Result<Alphabet> {
    public.validate()?;
    let spacing = public.n() / LETTERS.len();
    Ok(Alphabet {
        entries: LETTERS
            .chars()
            .enumerate()
            .map(|(k, c)| {
                let patch = DecoderPatch::starting_at(k * spacing, public.letter_width);
                (
                    c,
                    ClusterSpec::new(patch.center, patch.width).with_gain(public.cluster_gain),
                )
            })
            .collect(),
    })
}

/// Letter timing chosen by the sender.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub first_target_s: f64,
    pub letter_spacing_s: f64,
    pub lead_s: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            first_target_s: 1.0,
            letter_spacing_s: 1.0,
            lead_s: 0.5,
        }
    }
}

impl Schedule {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.lead_s > 0.0) {
            v.push("schedule.lead_s must be > 0".into());
        }
        if !(self.letter_spacing_s > 0.0) {
            v.push("schedule.letter_spacing_s must be > 0".into());
        }
        if !(self.first_target_s >= self.lead_s) {
            v.push("schedule.first_target_s must be >= lead_s".into());
        }
        if self.lead_s > self.letter_spacing_s {
            v.push("schedule.lead_s must not exceed letter_spacing_s".into());
        }
        v
    }

    pub fn apply_time_s(&self, j: usize) -> f64 {
        self.first_target_s + j as f64 * self.letter_spacing_s - self.lead_s
    }
}

/// Secret frequency and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    pub seed_material: Option<[u8; 16]>,
    pub frequency_hz: f64,
    pub initial_state: Vec<Complex64>,
}

impl SecretKey {
    pub fn omega_rad_per_s(&self) -> f64 {
        std::f64::consts::TAU * self.frequency_hz
    }

    pub fn initial(&self) -> NetworkState {
        NetworkState::new(self.initial_state.clone(), 0.0)
    }

    pub fn to_file(&self) -> KeyFile {
        match self.seed_material {
            Some(m) => KeyFile::Compact {
                seed_material_hex: hex::encode(m),
                n_nodes: Some(self.initial_state.len()),
            },
            None => self.to_expanded_file(),
        }
    }

    pub fn to_expanded_file(&self) -> KeyFile {
        KeyFile::Expanded {
            frequency_hz: self.frequency_hz,
            initial_state: self.initial_state.clone(),
        }
    }

    /// Deterministic per-key stream for Bob's background choices.
    fn sender_seed(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.frequency_hz.to_le_bytes());
        for z in &self.initial_state {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Key file contents: either the seed material or the expanded key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum KeyFile {
    Compact {
        seed_material_hex: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_nodes: Option<usize>,
    },
    Expanded {
        frequency_hz: f64,
        initial_state: Vec<Complex64>,
    },
}

impl KeyFile {
    pub fn resolve(&self, n_nodes: usize) -> Result<SecretKey> {
        match self {
            KeyFile::Compact {
                seed_material_hex,
                n_nodes: stored,
            } => {
                if let Some(m) = stored {
                    if *m != n_nodes {
                        return Err(CvnnError::HeaderMismatch(format!(
                            "key made for {m} nodes, network has {n_nodes}"
                        )));
                    }
                }
                let bytes = hex::decode(seed_material_hex)
                    .map_err(|e| CvnnError::Encoding(format!("seed material: {e}")))?;
                let material: [u8; 16] = bytes.try_into().map_err(|_| {
                    CvnnError::Encoding("seed material must be 16 bytes (32 hex digits)".into())
                })?;
                Ok(keygen(material, n_nodes))
            }
            KeyFile::Expanded {
                frequency_hz,
                initial_state,
            } => {
                if initial_state.len() != n_nodes {
                    return Err(CvnnError::HeaderMismatch(format!(
                        "key has {} nodes, network has {n_nodes}",
                        initial_state.len()
                    )));
                }
                Ok(SecretKey {
                    seed_material: None,
                    frequency_hz: *frequency_hz,
                    initial_state: initial_state.clone(),
                })
            }
        }
    }
}

/// Expand 128 bits of seed material: SHA-256 of the material seeds a
/// ChaCha20 stream that draws the frequency and then, node by node, an
/// amplitude and a phase.
pub fn keygen(seed_material: [u8; 16], n_nodes: usize) -> SecretKey {
    let digest: [u8; 32] = Sha256::digest(seed_material).into();
    let mut rng = ChaCha20Rng::from_seed(digest);
    let frequency_hz = rng.random_range(KEY_FREQUENCY_HZ.0..=KEY_FREQUENCY_HZ.1);
    let initial_state = (0..n_nodes)
        .map(|_| {
            let a = rng.random_range(KEY_AMPLITUDE.0..=KEY_AMPLITUDE.1);
            let p = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            Complex64::from_polar(a, p)
        })
        .collect();
    SecretKey {
        seed_material: Some(seed_material),
        frequency_hz,
        initial_state,
    }
}

/// Fresh 128-bit seed material from a seeded stream.
pub fn random_seed_material(seed: u64) -> [u8; 16] {
    let mut m = [0u8; 16];
    rng_from(seed, &[0x4E7]).fill_bytes(&mut m);
    m
}

/// Placeholder for a multi-key ciphertext: which key applies from which
/// input on. Decryption refuses ciphertexts that carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyHop {
    pub from_input: usize,
    pub key_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CipherInput {
    pub apply_time_s: f64,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub version: u32,
    pub n_nodes: usize,
    pub inputs: Vec<CipherInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_hops: Option<Vec<KeyHop>>,
}

impl Ciphertext {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Same inputs, every apply time shifted by `dt_s`.
    pub fn shifted(&self, dt_s: f64) -> Self {
        let mut c = self.clone();
        for i in &mut c.inputs {
            i.apply_time_s += dt_s;
        }
        c
    }

    fn check(&self, public: &PublicParams) -> Result<()> {
        if self.version != PROTOCOL_VERSION {
            return Err(CvnnError::HeaderMismatch(format!(
                "protocol version {} (expected {PROTOCOL_VERSION})",
                self.version
            )));
        }
        if self.n_nodes != public.n() {
            return Err(CvnnError::HeaderMismatch(format!(
                "ciphertext for {} nodes, network has {}",
                self.n_nodes,
                public.n()
            )));
        }
        if self.key_hops.is_some() {
            return Err(CvnnError::Unsupported(
                "ciphertexts with key hopping cannot be decrypted".into(),
            ));
        }
        let mut last = 0.0f64;
        for (j, i) in self.inputs.iter().enumerate() {
            if i.values.len() != self.n_nodes {
                return Err(CvnnError::HeaderMismatch(format!(
                    "input {j} has {} values",
                    i.values.len()
                )));
            }
            if !(i.apply_time_s.is_finite() && i.apply_time_s >= 0.0)
                || (j > 0 && i.apply_time_s <= last)
            {
                return Err(CvnnError::InvalidSpec(
                    "apply times must be non-negative and strictly increasing".into(),
                ));
            }
            last = i.apply_time_s;
        }
        Ok(())
    }
}

fn key_propagator(key: &SecretKey, public: &PublicParams) -> Result<Propagator> {
    public.validate()?;
    if key.initial_state.len() != public.n() {
        return Err(CvnnError::HeaderMismatch(format!(
            "key has {} nodes, network has {}",
            key.initial_state.len(),
            public.n()
        )));
    }
    let params = public.model.clone().with_frequency(key.frequency_hz);
    Propagator::from_params(&params)
}

/// Sample `duration_s` from `state` on the decode grid.
fn sample_segment(
    prop: &Propagator,
    state: &NetworkState,
    duration_s: f64,
    step_s: f64,
) -> Result<Trajectory> {
    let count = ((duration_s / step_s).round() as usize).max(1);
    let mut tr = prop.sample(state, count, step_s)?;
    for (k, t) in tr.times.iter_mut().enumerate() {
        *t = state.time_s + k as f64 * step_s;
    }
    Ok(tr)
}

/// Bob's acceptance test for one rendered letter: on the windows Alice may
/// use, the letter's unit gives exactly one activation and no other unit
/// comes within `render_margin` of threshold.
fn renders_cleanly(
    prop: &Propagator,
    post_input: &NetworkState,
    unit: usize,
    bank: &DecoderBank,
    public: &PublicParams,
    schedule: &Schedule,
) -> Result<bool> {
    let windows = [schedule.letter_spacing_s, public.decode_tail_s];
    let longest = windows.iter().cloned().fold(0.0, f64::max);
    let tr = sample_segment(prop, post_input, longest, public.sample_step_s)?;
    let limit = public.threshold - public.render_margin;
    for s in &tr.states {
        for (u, p) in bank.patches.iter().enumerate() {
            if u != unit && local_order_values(s, p)? >= limit {
                return Ok(false);
            }
        }
    }
    for w in windows {
        let part = tr.window(post_input.time_s, post_input.time_s + w);
        let tl = decode_timeline(&part, bank)?;
        if tl.len() != 1 || tl[0].unit != unit {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn encrypt(
    message: &str,
    key: &SecretKey,
    public: &PublicParams,
    schedule: &Schedule,
) -> Result<Ciphertext> {
    let sv = schedule.violations();
    if !sv.is_empty() {
        return Err(CvnnError::InvalidSpec(sv.join("; ")));
    }
    let alphabet = build_alphabet(public)?;
    let units: Vec<usize> = message
        .chars()
        .map(|c| alphabet.index_of(c))
        .collect::<Result<_>>()?;
    let prop = key_propagator(key, public)?;
    prop.check_invertible(schedule.lead_s)?;
    let bank = alphabet.bank(public)?;
    let base = key.sender_seed();

    let mut state = key.initial();
    let mut inputs = Vec::with_capacity(units.len());
    for (j, &unit) in units.iter().enumerate() {
        let t_j = schedule.apply_time_s(j);
        let mut at = prop.evolve(&state, t_j - state.time_s)?;
        at.time_s = t_j;
        let mut chosen: Option<(InputVector, NetworkState)> = None;
        for attempt in 0..public.max_render_attempts {
            let spec = alphabet.entries[unit]
                .1
                .clone()
                .with_seed(derive_seed(base, &[j as u64, attempt as u64]));
            let chi = make_cluster_target(&spec, &public.model)?.scaled(public.target_scale);
            let input = design_input(&at, &chi, schedule.lead_s, &prop)?;
            let post = apply_input(&at, &input)?;
            if renders_cleanly(&prop, &post, unit, &bank, public, schedule)? {
                chosen = Some((input, post));
                break;
            }
        }
        let (input, post) = chosen.ok_or_else(|| {
            CvnnError::Encoding(format!(
                "letter {:?} at position {j} did not render cleanly in {} attempts",
                alphabet.letter(unit),
                public.max_render_attempts
            ))
        })?;
        inputs.push(CipherInput {
            apply_time_s: t_j,
            values: input.values,
        });
        state = post;
    }
    Ok(Ciphertext {
        version: PROTOCOL_VERSION,
        n_nodes: public.n(),
        inputs,
        key_hops: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedLetter {
    pub letter: char,
    pub unit: usize,
    pub segment: usize,
    pub onset_s: f64,
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecryptReport {
    pub plaintext: String,
    pub letters: Vec<DecodedLetter>,
    pub warnings: Vec<String>,
}

struct Replay {
    report: DecryptReport,
    /// Largest patch similarity to any letter at any probe time.
    max_letter_similarity: f64,
}

fn replay(
    ct: &Ciphertext,
    key: &SecretKey,
    public: &PublicParams,
    probe_lead_s: Option<f64>,
) -> Result<Replay> {
    ct.check(public)?;
    let alphabet = build_alphabet(public)?;
    let bank = alphabet.bank(public)?;
    let prop = key_propagator(key, public)?;

    let mut letters = Vec::new();
    let mut warnings = Vec::new();
    let mut max_sim = 0.0f64;
    let mut state = key.initial();
    for (j, inp) in ct.inputs.iter().enumerate() {
        let mut at = prop.evolve(&state, inp.apply_time_s - state.time_s)?;
        at.time_s = inp.apply_time_s;
        let post = NetworkState::new(
            at.values
                .iter()
                .zip(&inp.values)
                .map(|(x, i)| x + i)
                .collect(),
            inp.apply_time_s,
        );
        let seg_len = match ct.inputs.get(j + 1) {
            Some(next) => next.apply_time_s - inp.apply_time_s,
            None => public.decode_tail_s,
        };
        if let Some(probe) = probe_lead_s {
            let probed = prop.evolve(&post, probe.min(seg_len))?;
            for p in &bank.patches {
                // The letter targets are constant-phase on their patch, so the
                // patch-restricted similarity is the local order.
                max_sim = max_sim.max(local_order_values(&probed.values, p)?);
            }
        }
        let tr = sample_segment(&prop, &post, seg_len, public.sample_step_s)?;
        let tl = decode_timeline(&tr, &bank)?;
        for w in tl.windows(2) {
            if w[1].onset_s - w[0].onset_s < SIMULTANEOUS_S {
                warnings.push(format!(
                    "simultaneous onsets of {:?} and {:?} at t = {:.3} s",
                    alphabet.letter(w[0].unit),
                    alphabet.letter(w[1].unit),
                    w[0].onset_s
                ));
            }
        }
        letters.extend(tl.into_iter().map(|a| DecodedLetter {
            letter: alphabet.letter(a.unit),
            unit: a.unit,
            segment: j,
            onset_s: a.onset_s,
            offset_s: a.offset_s,
        }));
        state = post;
    }
    if letters.is_empty() && !ct.inputs.is_empty() {
        warnings.push("no letter activations found".into());
    }
    Ok(Replay {
        report: DecryptReport {
            plaintext: letters.iter().map(|l| l.letter).collect(),
            letters,
            warnings,
        },
        max_letter_similarity: max_sim,
    })
}

pub fn decrypt_detailed(ct: &Ciphertext, key: &SecretKey, public: &PublicParams) -> Result<DecryptReport> {
    replay(ct, key, public, None).map(|r| r.report)
}

pub fn decrypt(ct: &Ciphertext, key: &SecretKey, public: &PublicParams) -> Result<String> {
    decrypt_detailed(ct, key, public).map(|r| r.plaintext)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EavesdropReport {
    pub decoded: String,
    pub max_letter_similarity: f64,
}

/// Decrypt with a guessed key and report how close the guessed network got
/// to any letter `probe_lead_s` after each input.
pub fn eavesdrop(
    ct: &Ciphertext,
    guessed_key: &SecretKey,
    public: &PublicParams,
    probe_lead_s: f64,
) -> Result<EavesdropReport> {
    let r = replay(ct, guessed_key, public, Some(probe_lead_s))?;
    Ok(EavesdropReport {
        decoded: r.report.plaintext,
        max_letter_similarity: r.max_letter_similarity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackStats {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub letters_total: usize,
    pub letter_hits: usize,
    pub per_letter_hit_rate: f64,
    /// One entry per trial, in trial order.
    pub max_letter_similarity: Vec<f64>,
}

/// Positional letter matches.
pub fn letter_hits(decoded: &str, plaintext: &str) -> usize {
    decoded
        .chars()
        .zip(plaintext.chars())
        .filter(|(a, b)| a == b)
        .count()
}

/// `n_trials` eavesdrops with independent random keys.
pub fn random_attack_eval(
    ct: &Ciphertext,
    plaintext: &str,
    public: &PublicParams,
    n_trials: usize,
    probe_lead_s: f64,
    base_seed: u64,
) -> Result<AttackStats> {
    let reports: Vec<EavesdropReport> = (0..n_trials)
        .into_par_iter()
        .map(|k| {
            let key = keygen(
                random_seed_material(derive_seed(base_seed, &[k as u64])),
                public.n(),
            );
            eavesdrop(ct, &key, public, probe_lead_s)
        })
        .collect::<Result<_>>()?;
    let plain = plaintext.to_ascii_uppercase();
    let successes = reports.iter().filter(|r| r.decoded == plain).count();
    let hits: usize = reports.iter().map(|r| letter_hits(&r.decoded, &plain)).sum();
    let letters_total = n_trials * plain.chars().count();
    Ok(AttackStats {
        trials: n_trials,
        successes,
        success_rate: if n_trials == 0 {
            0.0
        } else {
            successes as f64 / n_trials as f64
        },
        letters_total,
        letter_hits: hits,
        per_letter_hit_rate: if letters_total == 0 {
            0.0
        } else {
            hits as f64 / letters_total as f64
        },
        max_letter_similarity: reports.iter().map(|r| r.max_letter_similarity).collect(),
    })
}

/// Random message of `len` letters drawn from the alphabet.
pub fn random_message(len: usize, seed: u64) -> String {
    let letters: Vec<char> = LETTERS.chars().collect();
    let mut rng = rng_from(seed, &[0x3E55]);
    (0..len)
        .map(|_| letters[rng.random_range(0..letters.len())])
        .collect()
}

/// Global order parameter of a key's network, `delay_s` after the last
/// input of `ct` has been applied.
pub fn late_global_order(
    ct: &Ciphertext,
    key: &SecretKey,
    public: &PublicParams,
    delay_s: f64,
) -> Result<f64> {
    ct.check(public)?;
    let prop = key_propagator(key, public)?;
    let mut state = key.initial();
    for inp in &ct.inputs {
        let mut at = prop.evolve(&state, inp.apply_time_s - state.time_s)?;
        at.time_s = inp.apply_time_s;
        state = apply_input(
            &at,
            &InputVector::new(inp.values.clone(), inp.apply_time_s, 1.0)?,
        )?;
    }
    let end = prop.evolve(&state, delay_s)?;
    crate::decode::global_order(&end.values)
}
