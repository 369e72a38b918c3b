use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cvnn::crypto::{
    decrypt_detailed, eavesdrop, encrypt, keygen, random_attack_eval, random_seed_material, Ciphertext,
    KeyFile, SecretKey,
};
use cvnn::decode::{
    decode_timeline, global_order, local_order, write_timeline_csv, DecoderBank, DecoderPatch,
};
use cvnn::patterns::{
    apply_input, design_input, make_asynchronous_target, make_cluster_target, random_initial_state, similarity,
};
use cvnn::seeding::{derive_seed, rng_from};
use cvnn::sweep::{sweep_achievability, write_sweep_csv, SweepCell};
use cvnn::tasks::gates::{build_gate_inputs, truth_table, GateSpec};
use cvnn::tasks::memory::{run_item_trial, run_lif_trial, run_memory_schedule, unit_sequence, MemoryTask};
use cvnn::tasks::noise::{calibrate_xor_noise, noise_robustness_eval, write_accuracy_csv, TaskKind};
use cvnn::tasks::{run_segment, NoiseSettings};
use cvnn::{NetworkState, Propagator, Trajectory};
use image::{ImageBuffer, Rgb};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::raster::{render_raster, PhaseRaster};

type Res<T = ()> = Result<T, CliError>;

fn out_dir(cfg: &RunConfig) -> Res<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Res {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Res<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("{what} {}: {e}", path.display())]))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(vec![format!("{what} {}: {e}", path.display())]))
}

fn write_orders_csv(path: &Path, tr: &Trajectory, orders: &[Vec<f64>]) -> Res {
    let mut w = create(path)?;
    let units = orders.first().map_or(0, Vec::len);
    write!(w, "time_s")?;
    for u in 0..units {
        write!(w, ",unit_{u}")?;
    }
    writeln!(w)?;
    for (t, row) in tr.times.iter().zip(orders) {
        write!(w, "{t}")?;
        for r in row {
            write!(w, ",{r}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Random start, chimera input, release input back to asynchrony.
pub fn simulate(cfg: &RunConfig) -> Res {
    let dir = out_dir(cfg)?;
    let s = &cfg.simulate;
    let prop = Propagator::from_params(&cfg.model)?;
    let n = prop.n();
    let step = cfg.sample_step_s;
    let none = NoiseSettings::none();

    let x0 = random_initial_state(n, &mut rng_from(cfg.seed, &[0]));
    let spec = s
        .cluster
        .clone()
        .with_seed(derive_seed(cfg.seed, &[1, s.cluster.background_seed]));
    let chimera = make_cluster_target(&spec, &cfg.model)?;
    let release = make_asynchronous_target(derive_seed(cfg.seed, &[2]), &cfg.model);

    let mut traj = Trajectory::default();
    let (seg, mut at_first) = run_segment(&prop, &x0, s.first_input_s, step, &none)?;
    traj.extend(seg);
    at_first.time_s = s.first_input_s;
    let input1 = design_input(&at_first, &chimera, s.target_time_s - s.first_input_s, &prop)?;
    let after1 = apply_input(&at_first, &input1)?;
    let at_target = prop.evolve(&after1, s.target_time_s - s.first_input_s)?;

    let (seg, mut at_release) = run_segment(&prop, &after1, s.release_time_s - s.first_input_s, step, &none)?;
    traj.extend(seg);
    at_release.time_s = s.release_time_s;
    let input2 = design_input(&at_release, &release, s.release_lead_s, &prop)?;
    let after2 = apply_input(&at_release, &input2)?;
    let released = prop.evolve(&after2, s.release_lead_s)?;

    let (seg, mut end) = run_segment(&prop, &after2, s.end_s - s.release_time_s, step, &none)?;
    traj.extend(seg);
    end.time_s = s.end_s;
    traj.push(end.time_s, end.values.clone());

    let bank = DecoderBank::evenly_spaced(
        n,
        n / cfg.decoder.patch_width,
        cfg.decoder.patch_width,
        cfg.decoder.threshold,
        cfg.decoder.persistence_window_s,
    )?;
    let timeline = decode_timeline(&traj, &bank)?;
    write_timeline_csv(create(&dir.join("timeline.csv"))?, &timeline)?;
    render_raster(&PhaseRaster::from_trajectory(&traj), &dir, "raster")?;

    let s_target = similarity(&chimera, &at_target)?;
    let s_release = similarity(&release, &released)?;
    let cluster_patch = DecoderPatch::new(spec.center, spec.width);
    write_json(
        &dir.join("snapshots.json"),
        &json!({ "initial": x0, "target": at_target, "released": released, "end": end }),
    )?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "seed": cfg.seed,
            "similarity_at_target": s_target,
            "similarity_after_release": s_release,
            "cluster_order_at_target": local_order(&at_target, &cluster_patch)?,
            "global_order_at_target": global_order(&at_target.values)?,
            "global_order_at_end": global_order(&end.values)?,
            "input_norms": [input1.input_norm, input2.input_norm],
            "activations": timeline,
            "samples": traj.len(),
        }),
    )?;
    println!("similarity at target (t = {} s): {s_target:.6}", s.target_time_s);
    println!(
        "similarity to release pattern (t = {} s): {s_release:.6}",
        s.release_time_s + s.release_lead_s
    );
    Ok(())
}

fn render_heatmap(cells: &[SweepCell], n_phi: usize, n_tau: usize, path: &Path) -> Res {
    const CELL: u32 = 8;
    let img = ImageBuffer::from_fn(n_tau as u32 * CELL, n_phi as u32 * CELL, |x, y| {
        // Largest phi at the top.
        let i = n_phi - 1 - (y / CELL) as usize;
        let j = (x / CELL) as usize;
        let c = &cells[i * n_tau + j];
        let g = (c.mean_similarity.clamp(0.0, 1.0) * 255.0).round() as u8;
        if c.guard_failure_fraction > 0.0 {
            let r = (255.0 * c.guard_failure_fraction).round() as u8;
            Rgb([r.max(g / 2), g / 2, g / 2])
        } else {
            Rgb([g, g, g])
        }
    });
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Res {
    let dir = out_dir(cfg)?;
    let cells = sweep_achievability(&cfg.model, &cfg.sweep, cfg.seed)?;
    write_sweep_csv(create(&dir.join("sweep.csv"))?, &cells)?;
    render_heatmap(&cells, cfg.sweep.phi_grid.len(), cfg.sweep.tau_grid.len(), &dir.join("sweep.png"))?;
    let guarded = cells.iter().filter(|c| c.guard_failure_fraction > 0.0).count();
    let best = cells.iter().map(|c| c.mean_similarity).fold(0.0, f64::max);
    write_json(
        &dir.join("summary.json"),
        &json!({ "seed": cfg.seed, "cells": cells.len(), "guarded_cells": guarded, "max_mean_similarity": best }),
    )?;
    println!("{} cells, {guarded} with guard failures", cells.len());
    Ok(())
}

/// Sampled run of one gate row, for rendering.
fn gate_trajectory(spec: &GateSpec, x: bool, y: bool, x0: &NetworkState, prop: &Propagator, step: f64) -> Res<Trajectory> {
    let none = NoiseSettings::none();
    let t_apply = spec.apply_time_s();
    let (mut tr, mut at) = run_segment(prop, x0, t_apply - x0.time_s, step, &none)?;
    at.time_s = t_apply;
    if x {
        at = apply_input(&at, &spec.input_x)?;
    }
    if y {
        at = apply_input(&at, &spec.input_y)?;
    }
    let (seg, end) = run_segment(prop, &at, spec.decode_time_s - t_apply, step, &none)?;
    tr.extend(seg);
    tr.push(spec.decode_time_s, end.values);
    Ok(tr)
}

pub fn gate(cfg: &RunConfig) -> Res {
    let dir = out_dir(cfg)?;
    let g = &cfg.gate;
    let prop = Propagator::from_params(&cfg.model)?;
    let spec = build_gate_inputs(&g.params, &prop)?;
    let gate = g.params.gate;

    let tables = (0..g.trials as u64)
        .into_par_iter()
        .map(|k| {
            let x0 = random_initial_state(prop.n(), &mut rng_from(cfg.seed, &[k]));
            truth_table(&spec, &x0, &prop, &NoiseSettings::none())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = create(&dir.join("truth_table.csv"))?;
    writeln!(w, "trial,x,y,order,output,expected")?;
    let mut correct = 0;
    let mut row_correct = [0usize; 4];
    for (k, t) in tables.iter().enumerate() {
        let mut all = true;
        for (r, run) in t.iter().enumerate() {
            let expected = gate.truth(run.x_on, run.y_on);
            writeln!(
                w,
                "{k},{},{},{},{},{}",
                run.x_on as u8, run.y_on as u8, run.order, run.output as u8, expected as u8
            )?;
            if run.output == expected {
                row_correct[r] += 1;
            } else {
                all = false;
            }
        }
        correct += all as usize;
    }
    w.flush()?;

    let x0 = random_initial_state(prop.n(), &mut rng_from(cfg.seed, &[0]));
    for (x, y) in [(false, false), (true, false), (false, true), (true, true)] {
        let tr = gate_trajectory(&spec, x, y, &x0, &prop, cfg.sample_step_s)?;
        render_raster(&PhaseRaster::from_trajectory(&tr), &dir, &format!("raster_x{}_y{}", x as u8, y as u8))?;
    }

    let mut levels = g.noise_levels.clone();
    let mut sigma = None;
    if let Some(j) = g.jitter_target_rad {
        let s = calibrate_xor_noise(&g.params, &prop, j, 32, derive_seed(cfg.seed, &[0xCA1]))?;
        levels.push(s);
        sigma = Some(s);
    }
    let mut accuracy = Vec::new();
    if !levels.is_empty() {
        accuracy = noise_robustness_eval(
            TaskKind::Xor,
            &levels,
            g.noise_trials,
            derive_seed(cfg.seed, &[0xACC]),
            &g.params,
            &MemoryTask::default(),
            &prop,
        )?;
        write_accuracy_csv(create(&dir.join("accuracy.csv"))?, &accuracy)?;
    }
    write_json(
        &dir.join("summary.json"),
        &json!({
            "gate": gate.name(),
            "seed": cfg.seed,
            "trials": g.trials,
            "correct_tables": correct,
            "row_correct": row_correct,
            "calibrated_noise_std": sigma,
            "accuracy": accuracy,
        }),
    )?;
    println!("{}: {correct}/{} truth tables correct", gate.name(), g.trials);
    if let Some(s) = sigma {
        println!("calibrated noise std: {s:.6}");
    }
    Ok(())
}

pub fn memory(cfg: &RunConfig) -> Res {
    let dir = out_dir(cfg)?;
    let m = &cfg.memory;
    let prop = Propagator::from_params(&cfg.model)?;
    let run = run_memory_schedule(&m.task, &prop, &m.events, m.end_s, cfg.seed, &NoiseSettings::none())?;
    write_timeline_csv(create(&dir.join("timeline.csv"))?, &run.timeline)?;
    write_orders_csv(&dir.join("orders.csv"), &run.trajectory, &run.orders)?;
    render_raster(&PhaseRaster::from_trajectory(&run.trajectory), &dir, "raster")?;
    let sequence = unit_sequence(&run.timeline);

    let mut accuracy = None;
    if m.seeds_per_item > 0 {
        let trials: Vec<(usize, u64)> = (0..m.task.n_items)
            .flat_map(|i| (0..m.seeds_per_item as u64).map(move |s| (i, s)))
            .collect();
        let results = trials
            .par_iter()
            .map(|&(item, s)| {
                run_item_trial(&m.task, &prop, item, derive_seed(cfg.seed, &[s]), &NoiseSettings::none())
                    .map(|(ok, _)| (item, s, ok))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut w = create(&dir.join("memory_accuracy.csv"))?;
        writeln!(w, "item,seed_index,correct")?;
        for (item, s, ok) in &results {
            writeln!(w, "{item},{s},{}", *ok as u8)?;
        }
        w.flush()?;
        let correct = results.iter().filter(|r| r.2).count();
        accuracy = Some(json!({ "correct": correct, "trials": results.len() }));
        println!("items held: {correct}/{}", results.len());
    }
    write_json(
        &dir.join("summary.json"),
        &json!({
            "seed": cfg.seed,
            "events": m.events,
            "unit_sequence": sequence,
            "activations": run.timeline,
            "item_accuracy": accuracy,
        }),
    )?;
    println!("decoded unit sequence: {sequence:?}");
    Ok(())
}

pub fn lif(cfg: &RunConfig) -> Res {
    let dir = out_dir(cfg)?;
    let l = &cfg.lif;
    let prop = Propagator::from_params(&cfg.model)?;
    let gain = l.gain.unwrap_or(l.params.current_gain);
    let n_items = l.task.n_items;
    let trials: Vec<(u64, usize)> = (0..l.seeds as u64)
        .flat_map(|s| (0..n_items).map(move |i| (s, i)))
        .collect();
    let results = trials
        .par_iter()
        .map(|&(s, item)| run_lif_trial(&l.task, &prop, &l.params, gain, l.min_spikes, item, derive_seed(cfg.seed, &[s])))
        .collect::<Result<Vec<_>, _>>()?;

    let mut w = create(&dir.join("lif_trials.csv"))?;
    writeln!(w, "seed_index,item,patch,spikes,fired,readout")?;
    let mut fired_counts = vec![vec![0usize; n_items]; n_items];
    let mut correct = 0;
    for ((s, item), (trial, _)) in trials.iter().zip(&results) {
        for p in 0..n_items {
            writeln!(
                w,
                "{s},{item},{p},{},{},{}",
                trial.spike_counts[p], trial.fired[p] as u8, trial.readout[p] as u8
            )?;
            fired_counts[*item][p] += trial.fired[p] as usize;
        }
        correct += trial.correct() as usize;
    }
    w.flush()?;

    // Fraction of trials in which each patch fired, per remembered item.
    let mut w = create(&dir.join("lif_success.csv"))?;
    write!(w, "item")?;
    for p in 0..n_items {
        write!(w, ",patch_{p}")?;
    }
    writeln!(w)?;
    for (item, row) in fired_counts.iter().enumerate() {
        write!(w, "{item}")?;
        for c in row {
            write!(w, ",{}", *c as f64 / l.seeds as f64)?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    let mut w = create(&dir.join("spikes.csv"))?;
    writeln!(w, "item,patch,spike_time_s")?;
    for (trial, decisions) in results.iter().filter(|(t, _)| t.seed == derive_seed(cfg.seed, &[0])) {
        for (p, d) in decisions.iter().enumerate() {
            for t in &d.spikes.spike_times_s {
                writeln!(w, "{},{p},{t}", trial.item)?;
            }
        }
    }
    w.flush()?;

    write_json(
        &dir.join("summary.json"),
        &json!({
            "seed": cfg.seed,
            "gain": gain,
            "min_spikes": l.min_spikes,
            "trials": results.len(),
            "correct": correct,
            "fraction_correct": correct as f64 / results.len() as f64,
        }),
    )?;
    println!("LIF decoding: {correct}/{} trials correct", results.len());
    Ok(())
}

fn require<'a, T>(missing: &mut Vec<String>, value: &'a Option<T>, key: &str) -> Option<&'a T> {
    if value.is_none() {
        missing.push(format!("{key} is required"));
    }
    value.as_ref()
}

fn load_key(cfg: &RunConfig, path: &Path) -> Res<SecretKey> {
    let file: KeyFile = read_json(path, "key file")?;
    Ok(file.resolve(cfg.crypto.public.n())?)
}

fn message(cfg: &RunConfig) -> Res<Option<String>> {
    let c = &cfg.crypto;
    match (&c.message, &c.message_file) {
        (Some(m), _) => Ok(Some(m.clone())),
        (None, Some(p)) => Ok(Some(std::fs::read_to_string(p)?.trim_end_matches(['\n', '\r']).to_string())),
        (None, None) => Ok(None),
    }
}

fn missing(v: Vec<String>) -> Res {
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(v))
    }
}

pub fn crypto_keygen(cfg: &RunConfig) -> Res {
    let c = &cfg.crypto;
    let n = c.public.n();
    let key = match &c.seed_material_hex {
        Some(h) => KeyFile::Compact {
            seed_material_hex: h.clone(),
            n_nodes: Some(n),
        }
        .resolve(n)?,
        None => keygen(random_seed_material(cfg.seed), n),
    };
    let dir = out_dir(cfg)?;
    let file = if c.expanded_key {
        key.to_expanded_file()
    } else {
        key.to_file()
    };
    let path = dir.join("key.json");
    write_json(&path, &file)?;
    println!("key written to {}", path.display());
    Ok(())
}

pub fn crypto_encrypt(cfg: &RunConfig) -> Res {
    let c = &cfg.crypto;
    let text = message(cfg)?;
    let mut miss = Vec::new();
    let key_path = require(&mut miss, &c.key_file, "crypto.key_file");
    if text.is_none() {
        miss.push("crypto.message or crypto.message_file is required".into());
    }
    missing(miss)?;
    let key = load_key(cfg, key_path.expect("checked"))?;
    let text = text.expect("checked");
    let ct = encrypt(&text, &key, &c.public, &c.schedule)?;
    let dir = out_dir(cfg)?;
    let path = dir.join("ciphertext.json");
    write_json(&path, &ct)?;
    println!("{} inputs written to {}", ct.len(), path.display());
    Ok(())
}

fn load_ciphertext(cfg: &RunConfig, needs_key: bool) -> Res<(Ciphertext, Option<SecretKey>)> {
    let c = &cfg.crypto;
    let mut miss = Vec::new();
    let ct_path = require(&mut miss, &c.ciphertext_file, "crypto.ciphertext_file");
    let key_path = if needs_key {
        require(&mut miss, &c.key_file, "crypto.key_file")
    } else {
        None
    };
    missing(miss)?;
    let ct: Ciphertext = read_json(ct_path.expect("checked"), "ciphertext")?;
    let key = key_path.map(|p| load_key(cfg, p)).transpose()?;
    Ok((ct, key))
}

fn write_letters_csv(path: &Path, letters: &[cvnn::crypto::DecodedLetter]) -> Res {
    let mut w = create(path)?;
    writeln!(w, "letter,unit,segment,onset_s,offset_s")?;
    for l in letters {
        writeln!(w, "{},{},{},{},{}", l.letter, l.unit, l.segment, l.onset_s, l.offset_s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn crypto_decrypt(cfg: &RunConfig) -> Res {
    let (ct, key) = load_ciphertext(cfg, true)?;
    let report = decrypt_detailed(&ct, &key.expect("required"), &cfg.crypto.public)?;
    let dir = out_dir(cfg)?;
    std::fs::write(dir.join("plaintext.txt"), format!("{}\n", report.plaintext))?;
    write_letters_csv(&dir.join("letters.csv"), &report.letters)?;
    write_json(&dir.join("decrypt_report.json"), &report)?;
    println!("{}", report.plaintext);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.warnings.is_empty() || report.letters.len() != ct.len() {
        return Err(CliError::Decode(format!(
            "{} letters decoded from {} inputs",
            report.letters.len(),
            ct.len()
        )));
    }
    Ok(())
}

pub fn crypto_eavesdrop(cfg: &RunConfig) -> Res {
    let (ct, key) = load_ciphertext(cfg, true)?;
    let report = eavesdrop(&ct, &key.expect("required"), &cfg.crypto.public, cfg.crypto.probe_lead_s)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("eavesdrop.json"), &report)?;
    println!("decoded {:?}, max letter similarity {:.4}", report.decoded, report.max_letter_similarity);
    Ok(())
}

pub fn crypto_attack(cfg: &RunConfig) -> Res {
    let c = &cfg.crypto;
    let text = message(cfg)?;
    let mut miss = Vec::new();
    if text.is_none() {
        miss.push("crypto.message or crypto.message_file (the true plaintext) is required".into());
    }
    if c.ciphertext_file.is_none() {
        miss.push("crypto.ciphertext_file is required".into());
    }
    missing(miss)?;
    let (ct, _) = load_ciphertext(cfg, false)?;
    let stats = random_attack_eval(
        &ct,
        &text.expect("checked"),
        &c.public,
        c.attack_trials,
        c.probe_lead_s,
        cfg.seed,
    )?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("attack.json"), &stats)?;
    let mut w = create(&dir.join("attack.csv"))?;
    writeln!(w, "trial,max_letter_similarity")?;
    for (k, s) in stats.max_letter_similarity.iter().enumerate() {
        writeln!(w, "{k},{s}")?;
    }
    w.flush()?;
    println!(
        "{}/{} attacks succeeded; per-letter hit rate {:.4}",
        stats.successes, stats.trials, stats.per_letter_hit_rate
    );
    Ok(())
}
