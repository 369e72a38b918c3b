//! Oracles and property checks shared by the integration suites and the
//! acceptance harness. Everything here is written against the network
//! equation directly and does not reuse the library's coupling or
//! integration code.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use cvnn::decode::{local_order_values, readout, DecoderBank, DecoderPatch};
use cvnn::patterns::{similarity, TargetPattern};
use cvnn::seeding::rng_from;
use cvnn::{ModelParams, NetworkState, Propagator};
use num_complex::Complex64;
use proptest::test_runner::TestCaseError;
use rand::Rng;

/// Ring kernel `exp(-alpha * d)`, zero diagonal, each row summing to one.
pub fn oracle_coupling(n: usize, alpha: f64) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let mut total = 0.0;
        for j in 0..n {
            if i != j {
                let d = (i as isize - j as isize).unsigned_abs();
                let d = d.min(n - d) as f64;
                a[i * n + j] = (-alpha * d).exp();
                total += a[i * n + j];
            }
        }
        for j in 0..n {
            a[i * n + j] /= total;
        }
    }
    a
}

/// Classical RK4 for `dx/dt = i*omega*x + eps*e^{-i*phi} A x`. `A` is real, so
/// the matrix product is split into two real products.
pub fn rk4_oracle(x0: &[Complex64], t: f64, step: f64, p: &ModelParams) -> Vec<Complex64> {
    let n = x0.len();
    let a = oracle_coupling(n, p.decay_rate);
    let k = Complex64::from_polar(p.coupling_strength, -p.phase_delay_rad);
    let w = Complex64::new(0.0, TAU * p.natural_frequency_hz);
    let f = |x: &[Complex64], out: &mut [Complex64]| {
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            let (mut re, mut im) = (0.0, 0.0);
            for (aij, xj) in row.iter().zip(x) {
                re += aij * xj.re;
                im += aij * xj.im;
            }
            out[i] = w * x[i] + k * Complex64::new(re, im);
        }
    };
    let steps = (t / step).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut x = x0.to_vec();
    let zero = vec![Complex64::default(); n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero);
    for _ in 0..steps {
        f(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + k1[i] * (0.5 * h);
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + k2[i] * (0.5 * h);
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + k3[i] * h;
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            x[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
    }
    x
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Phase-only similarity computed straight from the definition.
pub fn oracle_similarity(target: &[Complex64], state: &[Complex64]) -> f64 {
    let acc: Complex64 = target
        .iter()
        .zip(state)
        .map(|(c, x)| (c / c.norm()) * (x / x.norm()).conj())
        .sum();
    acc.norm() / target.len() as f64
}

pub fn random_complex(n: usize, seed: u64, tag: u64) -> Vec<Complex64> {
    let mut rng = rng_from(seed, &[tag]);
    (0..n)
        .map(|_| Complex64::from_polar(rng.random_range(0.2..2.0), rng.random_range(-PI..PI)))
        .collect()
}

pub fn params(n: usize, eps: f64, phi: f64) -> ModelParams {
    ModelParams::default()
        .with_nodes(n)
        .with_coupling(eps)
        .with_phase_delay(phi)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

/// Relative tolerance for identities that hold exactly in exact arithmetic.
pub const IDENTITY_TOL: f64 = 1e-9;

pub type Case = (usize, f64, f64, u64);

pub fn group_property((n, eps, phi, seed): Case, s: f64, t: f64) -> Result<(), TestCaseError> {
    let prop = Propagator::from_params(&params(n, eps, phi)).unwrap();
    let x = NetworkState::new(random_complex(n, seed, 0), 0.0);
    let two = prop.evolve(&prop.evolve(&x, s).unwrap(), t).unwrap();
    let one = prop.evolve(&x, s + t).unwrap();
    let err = diff_norm(&two.values, &one.values) / norm(&one.values);
    ensure(err <= IDENTITY_TOL, || format!("group error {err}"))?;
    ensure((two.time_s - one.time_s).abs() < 1e-12, || "time stamps differ".into())
}

pub fn linearity((n, eps, phi, seed): Case, t: f64, a: Complex64, b: Complex64) -> Result<(), TestCaseError> {
    let prop = Propagator::from_params(&params(n, eps, phi)).unwrap();
    let x = random_complex(n, seed, 1);
    let y = random_complex(n, seed, 2);
    let mix: Vec<Complex64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
    let ev = |v: Vec<Complex64>| prop.evolve(&NetworkState::new(v, 0.0), t).unwrap().values;
    let lhs = ev(mix);
    let (ex, ey) = (ev(x), ev(y));
    let rhs: Vec<Complex64> = ex.iter().zip(&ey).map(|(u, v)| a * u + b * v).collect();
    let scale = (a.norm() * norm(&ex) + b.norm() * norm(&ey)).max(1e-300);
    let err = diff_norm(&lhs, &rhs) / scale;
    ensure(err <= IDENTITY_TOL, || format!("linearity error {err}"))
}

pub fn phase_equivariance((n, eps, phi, seed): Case, t: f64, theta: f64) -> Result<(), TestCaseError> {
    let prop = Propagator::from_params(&params(n, eps, phi)).unwrap();
    let x = NetworkState::new(random_complex(n, seed, 3), 0.0);
    let rot = Complex64::from_polar(1.0, theta);
    let lhs = prop.evolve(&x.scaled(rot), t).unwrap();
    let rhs = prop.evolve(&x, t).unwrap().scaled(rot);
    let err = diff_norm(&lhs.values, &rhs.values) / norm(&rhs.values);
    ensure(err <= IDENTITY_TOL, || format!("equivariance error {err}"))
}

/// Global phase shift of the state, per-node positive rescaling, and a joint
/// permutation of target and state leave the similarity unchanged; the
/// library value agrees with the definition.
pub fn similarity_invariances(n: usize, seed: u64, theta: f64) -> Result<(), TestCaseError> {
    let chi = random_complex(n, seed, 4);
    let x = random_complex(n, seed, 5);
    let mut rng = rng_from(seed, &[6]);
    let target = TargetPattern::from_complex(&chi).unwrap();
    let base = similarity(&target, &NetworkState::new(x.clone(), 0.0)).unwrap();
    ensure((base - oracle_similarity(&chi, &x)).abs() < 1e-12, || "definition mismatch".into())?;

    let rot = Complex64::from_polar(1.0, theta);
    let rotated: Vec<Complex64> = x.iter().map(|z| z * rot).collect();
    let s = similarity(&target, &NetworkState::new(rotated, 0.0)).unwrap();
    ensure((s - base).abs() < 1e-12, || format!("phase: {s} vs {base}"))?;

    let stretched: Vec<Complex64> = x.iter().map(|z| z * rng.random_range(0.01..100.0)).collect();
    let s = similarity(&target, &NetworkState::new(stretched, 0.0)).unwrap();
    ensure((s - base).abs() < 1e-12, || format!("amplitude: {s} vs {base}"))?;

    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let pc: Vec<Complex64> = perm.iter().map(|&i| chi[i]).collect();
    let px: Vec<Complex64> = perm.iter().map(|&i| x[i]).collect();
    let s = similarity(
        &TargetPattern::from_complex(&pc).unwrap(),
        &NetworkState::new(px, 0.0),
    )
    .unwrap();
    ensure((s - base).abs() < 1e-12, || format!("permutation: {s} vs {base}"))?;
    ensure((0.0..=1.0).contains(&base), || format!("range {base}"))
}

/// Local order of a patch under global phase, per-node amplitude changes and
/// permutations of nodes inside the patch.
pub fn order_invariances(n: usize, seed: u64, start: usize, width: usize, theta: f64) -> Result<(), TestCaseError> {
    let x = random_complex(n, seed, 7);
    let patch = DecoderPatch::starting_at(start % n, width);
    let idx: Vec<usize> = patch.indices(n).collect();
    let r = local_order_values(&x, &patch).unwrap();
    let oracle = {
        let acc: Complex64 = idx.iter().map(|&j| x[j] / x[j].norm()).sum();
        acc.norm() / width as f64
    };
    ensure((r - oracle).abs() < 1e-12, || format!("definition {r} vs {oracle}"))?;

    let mut rng = rng_from(seed, &[8]);
    let rot = Complex64::from_polar(1.0, theta);
    let y: Vec<Complex64> = x
        .iter()
        .map(|z| z * rot * rng.random_range(0.01..100.0))
        .collect();
    let r2 = local_order_values(&y, &patch).unwrap();
    ensure((r2 - r).abs() < 1e-12, || format!("phase/amplitude {r2} vs {r}"))?;

    let mut shuffled = x.clone();
    let mut perm = idx.clone();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    for (dst, src) in idx.iter().zip(&perm) {
        shuffled[*dst] = x[*src];
    }
    let r3 = local_order_values(&shuffled, &patch).unwrap();
    ensure((r3 - r).abs() < 1e-12, || format!("permutation {r3} vs {r}"))
}

/// A patch that reads active at a threshold also reads active at every lower
/// threshold.
pub fn threshold_monotonicity(seed: u64, lo: f64, hi: f64) -> Result<(), TestCaseError> {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let n = 64;
    let mut x = random_complex(n, seed, 9);
    let mut rng = rng_from(seed, &[10]);
    // Partially align a few patches so readouts are not all false.
    for start in [0usize, 16, 40] {
        let spread = rng.random_range(0.0..PI);
        let center = rng.random_range(-PI..PI);
        for j in start..start + 8 {
            x[j] = Complex64::from_polar(x[j].norm(), center + rng.random_range(-spread..=spread));
        }
    }
    let state = NetworkState::new(x, 0.0);
    let bank = DecoderBank::tiling(n, 8).unwrap();
    let at_lo = readout(&state, &bank.clone().with_threshold(lo).unwrap()).unwrap();
    let at_hi = readout(&state, &bank.with_threshold(hi).unwrap()).unwrap();
    for (k, (a, b)) in at_lo.iter().zip(&at_hi).enumerate() {
        ensure(!*b || *a, || format!("patch {k} active at {hi} but not at {lo}"))?;
    }
    Ok(())
}
