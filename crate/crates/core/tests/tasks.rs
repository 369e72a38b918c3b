use std::f64::consts::PI;

use cvnn::decode::{decode_timeline, global_order, readout, DecoderBank};
use cvnn::patterns::random_initial_state;
use cvnn::seeding::rng_from;
use cvnn::tasks::gates::{
    build_gate_inputs, build_xor_inputs_with_offset, table_correct, truth_table, GateConfig, GateKind,
    GateSpec,
};
use cvnn::tasks::memory::{
    run_erase_trial, run_item_trial, run_memory_schedule, run_sequence_trial, MemoryEvent, MemoryTask,
};
use cvnn::tasks::noise::{noise_robustness_eval, TaskKind};
use cvnn::tasks::NoiseSettings;
use cvnn::{ModelParams, Propagator};
use rand::Rng;
use rayon::prelude::*;

fn prop() -> Propagator {
    Propagator::from_params(&ModelParams::default()).unwrap()
}

#[test]
fn every_gate_is_correct_over_100_seeds() {
    let prop = prop();
    for gate in GateKind::ALL {
        let spec = build_gate_inputs(&GateConfig { gate, ..GateConfig::default() }, &prop).unwrap();
        let ok = (0..100u64)
            .into_par_iter()
            .filter(|&s| {
                let x0 = random_initial_state(prop.n(), &mut rng_from(s, &[0]));
                table_correct(gate, &truth_table(&spec, &x0, &prop, &NoiseSettings::none()).unwrap())
            })
            .count();
        assert_eq!(ok, 100, "{}", gate.name());
    }
}

#[test]
fn xor_tolerates_offsets_near_antiphase() {
    let prop = prop();
    let cfg = GateConfig::default();
    let base = build_gate_inputs(&cfg, &prop).unwrap();
    let thetas = [PI - 0.3, PI - 0.1, PI, PI + 0.1, PI + 0.3];
    let mut both_on = [0.0; 5];
    for seed in 0..10u64 {
        let x0 = random_initial_state(prop.n(), &mut rng_from(seed, &[0]));
        let reference = truth_table(&base, &x0, &prop, &NoiseSettings::none()).unwrap();
        for (k, &theta) in thetas.iter().enumerate() {
            let (ix, iy) = build_xor_inputs_with_offset(&cfg, &prop, theta).unwrap();
            let spec = GateSpec {
                input_x: ix,
                input_y: iy,
                ..base.clone()
            };
            let t = truth_table(&spec, &x0, &prop, &NoiseSettings::none()).unwrap();
            if (theta - PI).abs() <= 0.1 + 1e-12 {
                for (a, b) in t.iter().zip(&reference) {
                    assert_eq!(a.output, b.output, "theta {theta}, seed {seed}");
                }
            }
            both_on[k] += t[3].order / 10.0;
        }
    }
    // The residual cluster grows with the distance from exact antiphase.
    assert!(both_on[2] < both_on[1] && both_on[1] < both_on[0], "{both_on:?}");
    assert!(both_on[2] < both_on[3] && both_on[3] < both_on[4], "{both_on:?}");
}

#[test]
fn free_running_network_never_reads_active() {
    let prop = prop();
    let bank = DecoderBank::tiling(256, 32).unwrap().with_threshold(0.9).unwrap();
    let hits: usize = (0..1000u64)
        .into_par_iter()
        .map(|s| {
            let x0 = random_initial_state(256, &mut rng_from(s, &[3]));
            let y = prop.evolve(&x0, 2.0).unwrap();
            readout(&y, &bank).unwrap().iter().filter(|b| **b).count()
        })
        .sum();
    assert_eq!(hits, 0);

    let x0 = random_initial_state(256, &mut rng_from(1, &[4]));
    let traj = prop.sample(&x0, 301, 0.01).unwrap();
    assert!(decode_timeline(&traj, &DecoderBank::tiling(256, 32).unwrap())
        .unwrap()
        .is_empty());
}

#[test]
fn item_two_timeline() {
    let prop = prop();
    let task = MemoryTask::default();
    let (ok, run) = run_item_trial(&task, &prop, 2, 7, &NoiseSettings::none()).unwrap();
    assert!(ok);
    assert_eq!(run.timeline.len(), 1);
    let a = run.timeline[0];
    assert_eq!(a.unit, 2);
    assert!(a.duration_s() >= task.hold_s - 1e-6, "{a:?}");
}

#[test]
fn cue_then_erase_goes_quiet() {
    let prop = prop();
    let task = MemoryTask::default();
    // Erase at the moment the cued item would appear.
    let erase_at = task.target_time_s();
    let run = run_memory_schedule(
        &task,
        &prop,
        &[
            MemoryEvent::Cue {
                item: 5,
                time_s: task.cue_time_s,
            },
            MemoryEvent::Erase { time_s: erase_at },
        ],
        erase_at + 3.0,
        11,
        &NoiseSettings::none(),
    )
    .unwrap();
    assert!(run.silent(erase_at, erase_at + 3.0, task.threshold));

    let orders: Vec<f64> = (0..20u64)
        .map(|s| run_erase_trial(&task, &prop, s as usize % 8, 5.0, 1.5, s).unwrap().0.global_order_after)
        .collect();
    let mean = orders.iter().sum::<f64>() / orders.len() as f64;
    // Asynchronous level is about sqrt(pi / (4N)) ~ 0.055 for N = 256.
    assert!(mean < 0.15, "{mean}");
    assert!(global_order(&run.final_state.values).unwrap() < 0.3);
}

#[test]
fn random_sequences_decode_in_order() {
    let prop = prop();
    let task = MemoryTask::default();
    let ok = (0..20u64)
        .into_par_iter()
        .filter(|&s| {
            let mut rng = rng_from(s, &[21]);
            let items: Vec<usize> = (0..5).map(|_| rng.random_range(0..8)).collect();
            run_sequence_trial(&task, &prop, &items, 2.0, s).unwrap().0
        })
        .count();
    assert_eq!(ok, 20);
}

#[test]
fn accuracy_falls_with_noise() {
    let prop = prop();
    let levels = [0.0, 0.1, 0.4, 1.6];
    for kind in [TaskKind::Xor, TaskKind::Memory] {
        let rows = noise_robustness_eval(
            kind,
            &levels,
            40,
            5,
            &GateConfig::default(),
            &MemoryTask::default(),
            &prop,
        )
        .unwrap();
        assert_eq!(rows[0].correct, 40, "{kind:?}");
        for w in rows.windows(2) {
            assert!(w[1].accuracy <= w[0].ci_high + 1e-12, "{kind:?}: {rows:?}");
        }
        assert!(rows[3].accuracy < rows[0].accuracy, "{kind:?}: {rows:?}");
    }
}
