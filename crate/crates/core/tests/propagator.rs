mod common;

use std::f64::consts::{FRAC_PI_2, TAU};

use common::*;
use cvnn::reference::integrate_reference;
use cvnn::{build_ring_coupling, CvnnError, ModelParams, NetworkState, Propagator, CONDITION_GUARD};

#[test]
fn small_ring_matches_both_rk4_integrators() {
    let p = ModelParams::default()
        .with_nodes(8)
        .with_coupling(0.3)
        .with_phase_delay(FRAC_PI_2);
    let prop = Propagator::from_params(&p).unwrap();
    let x = NetworkState::new(random_complex(8, 42, 0), 0.0);
    let exact = prop.evolve(&x, 0.5).unwrap();

    let lib = integrate_reference(&x, 0.5, 1e-5, &p, &build_ring_coupling(&p).unwrap()).unwrap();
    let ours = rk4_oracle(&x.values, 0.5, 1e-5, &p);
    let scale = norm(&x.values);
    assert!(diff_norm(&exact.values, &lib.values) / scale < 1e-6);
    assert!(diff_norm(&exact.values, &ours) / scale < 1e-6);
    assert!(diff_norm(&lib.values, &ours) / scale < 1e-9);
}

#[test]
fn dense_and_circulant_paths_agree() {
    for (k, phi) in [0.0, 1.0, FRAC_PI_2, 3.0, 5.5].into_iter().enumerate() {
        let p = ModelParams::default().with_nodes(40).with_phase_delay(phi).with_coupling(0.8);
        let ring = Propagator::from_params(&p).unwrap();
        let dense =
            Propagator::factorize_dense(&build_ring_coupling(&p).unwrap().as_dense(), &p).unwrap();
        let x = NetworkState::new(random_complex(40, k as u64, 1), 0.0);
        let a = ring.evolve(&x, 1.3).unwrap();
        let b = dense.evolve(&x, 1.3).unwrap();
        assert!(diff_norm(&a.values, &b.values) / norm(&a.values) < 1e-10, "phi {phi}");
    }
}

/// `log kappa = eps * (max c_k - min c_k) * dt` at zero delay, with `c_k`
/// the DFT of the kernel's first row.
fn oracle_log_kappa(p: &ModelParams, dt: f64) -> f64 {
    let n = p.n_nodes;
    let row = &oracle_coupling(n, p.decay_rate)[..n];
    let spectrum: Vec<f64> = (0..n)
        .map(|k| {
            row.iter()
                .enumerate()
                .map(|(j, a)| a * (TAU * (k * j) as f64 / n as f64).cos())
                .sum()
        })
        .collect();
    let hi = spectrum.iter().cloned().fold(f64::MIN, f64::max);
    let lo = spectrum.iter().cloned().fold(f64::MAX, f64::min);
    p.coupling_strength * (hi - lo) * dt
}

#[test]
fn zero_delay_conditioning_matches_spectrum() {
    // Weak, wide kernel: the real spread over 10 s stays far below the guard
    // and the inverse is computed.
    let weak = ModelParams::default()
        .with_phase_delay(0.0)
        .with_coupling(0.5)
        .with_decay(0.1);
    let prop = Propagator::from_params(&weak).unwrap();
    let expect = oracle_log_kappa(&weak, 10.0);
    assert!((prop.log_condition(10.0) - expect).abs() < 1e-9 * expect.max(1.0));
    assert!(expect < CONDITION_GUARD.ln());
    let x = NetworkState::new(random_complex(256, 1, 2), 0.0);
    let back = prop.evolve_inverse(&x, 10.0).unwrap();
    let again = prop.evolve(&back.state, 10.0).unwrap();
    assert!(diff_norm(&again.values, &x.values) / norm(&x.values) < 1e-6);

    // Default coupling at zero delay is refused.
    let strong = ModelParams::default().with_phase_delay(0.0);
    let prop = Propagator::from_params(&strong).unwrap();
    let expect = oracle_log_kappa(&strong, 10.0);
    assert!((prop.log_condition(10.0) - expect).abs() < 1e-9 * expect);
    assert!(expect > CONDITION_GUARD.ln());
    let err = prop.evolve_inverse(&x, 10.0).unwrap_err();
    assert!(err.is_conditioning(), "{err}");
    assert!(matches!(err, CvnnError::IllConditioned { .. }));
}

#[test]
fn quarter_delay_is_norm_preserving() {
    let prop = Propagator::from_params(&ModelParams::default()).unwrap();
    let x = NetworkState::new(random_complex(256, 3, 3), 0.0);
    for t in [0.1, 4.0, 10.0, 60.0] {
        let y = prop.evolve(&x, t).unwrap();
        assert!((norm(&y.values) / norm(&x.values) - 1.0).abs() < 1e-10);
        assert!((prop.condition(t) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn sampled_trajectory_is_uniform_and_exact() {
    let prop = Propagator::from_params(&ModelParams::default().with_nodes(32)).unwrap();
    let x = NetworkState::new(random_complex(32, 4, 4), 0.0);
    let traj = prop.sample(&x, 51, 0.02).unwrap();
    assert_eq!(traj.len(), 51);
    assert!((traj.step().unwrap() - 0.02).abs() < 1e-12);
    let last = prop.evolve(&x, 1.0).unwrap();
    assert!(diff_norm(&traj.states[50], &last.values) < 1e-9);
}

#[test]
fn uncoupled_network_rotates_at_natural_frequency() {
    let p = ModelParams::default().with_nodes(16).with_coupling(0.0);
    let prop = Propagator::from_params(&p).unwrap();
    let x = NetworkState::new(random_complex(16, 5, 5), 0.0);
    let t = 0.0371;
    let y = prop.evolve(&x, t).unwrap();
    let rot = num_complex::Complex64::from_polar(1.0, TAU * p.natural_frequency_hz * t);
    for (a, b) in y.values.iter().zip(&x.values) {
        assert!((a - b * rot).norm() < 1e-12);
    }
}
