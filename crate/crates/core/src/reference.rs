//! Fixed-step RK4 on the dense network equation. Slow; used as an
//! independent cross-check of the spectral propagator.

use num_complex::Complex64;

use crate::error::{CvnnError, Result};
use crate::network::{CouplingMatrix, ModelParams};
use crate::state::NetworkState;

fn rhs(gen: &[Complex64], diag: Complex64, x: &[Complex64], out: &mut [Complex64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &gen[i * n..(i + 1) * n];
        let mut acc = diag * x[i];
        for (g, v) in row.iter().zip(x) {
            acc += g * v;
        }
        *o = acc;
    }
}

/// Integrate `dx/dt = (i*omega*I + eps*e^{-i*phi}*A) x` over `dt_s` with the
/// classical fourth-order Runge-Kutta scheme. The step is shrunk so that an
/// integer number of steps covers `dt_s` exactly.
pub fn integrate_reference(
    state: &NetworkState,
    dt_s: f64,
    step_s: f64,
    params: &ModelParams,
    coupling: &CouplingMatrix,
) -> Result<NetworkState> {
    params.validate()?;
    if !(step_s > 0.0 && step_s <= dt_s && dt_s.is_finite()) {
        return Err(CvnnError::invalid(format!(
            "need 0 < step ({step_s}) <= dt ({dt_s})"
        )));
    }
    let n = coupling.n();
    if state.len() != n || params.n_nodes != n {
        return Err(CvnnError::invalid("state, params and coupling sizes differ"));
    }

    let k = Complex64::from_polar(params.coupling_strength, -params.phase_delay_rad);
    let gen: Vec<Complex64> = coupling.weights().iter().map(|w| k * w).collect();
    let diag = Complex64::new(0.0, params.omega());

    let steps = (dt_s / step_s - 1e-9).ceil() as usize;
    let h = dt_s / steps as f64;

    let mut x = state.values.clone();
    let mut k1 = vec![Complex64::default(); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for _ in 0..steps {
        rhs(&gen, diag, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + k1[i] * (h / 2.0);
        }
        rhs(&gen, diag, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + k2[i] * (h / 2.0);
        }
        rhs(&gen, diag, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + k3[i] * h;
        }
        rhs(&gen, diag, &tmp, &mut k4);
        for i in 0..n {
            x[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    Ok(NetworkState::new(x, state.time_s + dt_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_ring_coupling;
    use crate::propagator::Propagator;
    use crate::seeding::rng_from;

    #[test]
    fn quarter_rotation_without_coupling() {
        let p = ModelParams::default().with_nodes(8).with_coupling(0.0);
        let a = build_ring_coupling(&p).unwrap();
        let x = NetworkState::random_phases(8, 0.0, &mut rng_from(1, &[]));
        let y = integrate_reference(&x, 0.025, 1e-5, &p, &a).unwrap();
        for (u, v) in y.values.iter().zip(&x.values) {
            assert!((u - v * Complex64::i()).norm() < 1e-8);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        // Large coupling so truncation error dominates rounding.
        let p = ModelParams::default()
            .with_nodes(8)
            .with_coupling(30.0)
            .with_phase_delay(1.0)
            .with_frequency(40.0);
        let a = build_ring_coupling(&p).unwrap();
        let prop = Propagator::from_params(&p).unwrap();
        let x = NetworkState::random_phases(8, 0.0, &mut rng_from(2, &[]));
        let exact = prop.evolve(&x, 0.05).unwrap();
        let err = |h: f64| {
            let y = integrate_reference(&x, 0.05, h, &p, &a).unwrap();
            y.values
                .iter()
                .zip(&exact.values)
                .map(|(u, v)| (u - v).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let ratio = err(1e-4) / err(5e-5);
        assert!((ratio - 16.0).abs() < 1.6, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_step() {
        let p = ModelParams::default().with_nodes(4);
        let a = build_ring_coupling(&p).unwrap();
        let x = NetworkState::zeros(4, 0.0);
        assert!(integrate_reference(&x, 0.1, 0.2, &p, &a).is_err());
        assert!(integrate_reference(&x, 0.1, 0.0, &p, &a).is_err());
    }
}
