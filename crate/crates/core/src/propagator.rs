//! Exact time evolution in the eigenbasis of `i*omega*I + K`.
//!
//! For a symmetric circulant `A` the eigenvectors are discrete Fourier modes
//! and the eigenvalues of `A` are the (real) DFT coefficients of its first
//! row, so one FFT pair diagonalizes the dynamics. Any other symmetric `A`
//! goes through a dense symmetric eigendecomposition. In both cases the
//! modal frequencies are `mu_m = i*omega + eps * e^{-i*phi} * c_m`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{CvnnError, Result};
use crate::network::{build_ring_coupling, CouplingMatrix, ModelParams};
use crate::seeding::rng_from;
use crate::state::{NetworkState, Trajectory};

/// Largest condition number accepted by [`Propagator::evolve_inverse`].
pub const CONDITION_GUARD: f64 = 1e12;

/// Largest exponent for which `exp` stays finite in f64.
const MAX_EXPONENT: f64 = 709.0;

#[derive(Clone)]
enum Basis {
    Fourier {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    /// Columns are orthonormal eigenvectors of `A`.
    Dense { vectors: DMatrix<f64> },
}

/// Which eigenbasis a [`Propagator`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Fourier,
    Dense,
}

/// Spectral factorization of the network generator. Immutable and `Sync`,
/// so one instance can be shared by any number of concurrent runs.
#[derive(Clone)]
pub struct Propagator {
    params: ModelParams,
    coupling_spectrum: Vec<f64>,
    modal: Vec<Complex64>,
    basis: Basis,
}

impl fmt::Debug for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Propagator")
            .field("params", &self.params)
            .field("basis", &self.basis_kind())
            .field("modes", &self.modal.len())
            .finish()
    }
}

/// Result of [`Propagator::evolve_inverse`].
#[derive(Debug, Clone)]
pub struct Inversion {
    pub state: NetworkState,
    /// `exp((max Re mu - min Re mu) * dt)`
    pub kappa: f64,
}

/// Factorize `i*omega*I + eps*e^{-i*phi}*A`.
pub fn spectral_factorize(coupling: &CouplingMatrix, params: &ModelParams) -> Result<Propagator> {
    params.validate()?;
    if coupling.n() != params.n_nodes {
        return Err(CvnnError::invalid(format!(
            "coupling has {} nodes, params say {}",
            coupling.n(),
            params.n_nodes
        )));
    }
    if coupling.is_circulant() {
        fourier_factorize(coupling, params)
    } else {
        dense_factorize(coupling, params)
    }
}

fn modal_frequencies(params: &ModelParams, spectrum: &[f64]) -> Vec<Complex64> {
    let omega = params.omega();
    let k = Complex64::from_polar(params.coupling_strength, -params.phase_delay_rad);
    spectrum
        .iter()
        .map(|&c| Complex64::new(0.0, omega) + k * c)
        .collect()
}

fn fourier_factorize(coupling: &CouplingMatrix, params: &ModelParams) -> Result<Propagator> {
    let n = coupling.n();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut row: Vec<Complex64> = coupling
        .row(0)
        .iter()
        .map(|&w| Complex64::new(w, 0.0))
        .collect();
    forward.process(&mut row);
    let coupling_spectrum: Vec<f64> = row.iter().map(|c| c.re).collect();

    Ok(Propagator {
        params: params.clone(),
        modal: modal_frequencies(params, &coupling_spectrum),
        coupling_spectrum,
        basis: Basis::Fourier { forward, inverse },
    })
}

fn dense_factorize(coupling: &CouplingMatrix, params: &ModelParams) -> Result<Propagator> {
    let n = coupling.n();
    let scale = coupling
        .weights()
        .iter()
        .fold(0.0f64, |m, w| m.max(w.abs()))
        .max(f64::MIN_POSITIVE);
    if !coupling.is_symmetric(1e-12 * scale) {
        return Err(CvnnError::Factorization(
            "dense fallback needs symmetric weights (directed graphs are unsupported)".into(),
        ));
    }
    let a = DMatrix::from_row_slice(n, n, coupling.weights());
    let eig = SymmetricEigen::new(a.clone());

    let recon = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues)
        * eig.eigenvectors.transpose();
    let err = (recon - &a).norm();
    if !(err <= 1e-10 * a.norm().max(f64::MIN_POSITIVE)) {
        return Err(CvnnError::Factorization(format!(
            "eigendecomposition residual {err:.3e} exceeds tolerance"
        )));
    }

    let coupling_spectrum: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    Ok(Propagator {
        params: params.clone(),
        modal: modal_frequencies(params, &coupling_spectrum),
        coupling_spectrum,
        basis: Basis::Dense {
            vectors: eig.eigenvectors,
        },
    })
}

impl Propagator {
    /// Ring coupling built from `params`, then factorized.
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let a = build_ring_coupling(params)?;
        spectral_factorize(&a, params)
    }

    /// Force the dense eigendecomposition path on the same weights.
    pub fn factorize_dense(coupling: &CouplingMatrix, params: &ModelParams) -> Result<Self> {
        spectral_factorize(&coupling.as_dense(), params)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.modal.len()
    }

    pub fn basis_kind(&self) -> BasisKind {
        match self.basis {
            Basis::Fourier { .. } => BasisKind::Fourier,
            Basis::Dense { .. } => BasisKind::Dense,
        }
    }

    /// Eigenvalues `c_m` of the coupling matrix `A`.
    pub fn coupling_spectrum(&self) -> &[f64] {
        &self.coupling_spectrum
    }

    /// `mu_m = i*omega + lambda_m`.
    pub fn modal_frequencies(&self) -> &[Complex64] {
        &self.modal
    }

    /// Eigenvalues `lambda_m` of `K`.
    pub fn interaction_eigenvalues(&self) -> Vec<Complex64> {
        let omega = Complex64::new(0.0, self.params.omega());
        self.modal.iter().map(|mu| mu - omega).collect()
    }

    /// Dense `K = V diag(lambda) V^{-1}` rebuilt from the factorization,
    /// row-major. Diagnostic only; O(N^2) memory.
    pub fn reconstruct_interaction(&self) -> Vec<Complex64> {
        let n = self.n();
        let lambda = self.interaction_eigenvalues();
        let mut k = vec![Complex64::new(0.0, 0.0); n * n];
        match &self.basis {
            Basis::Fourier { .. } => {
                // K_{jl} = (1/N) sum_m lambda_m e^{2 pi i m (j - l) / N}
                for d in 0..n {
                    let v: Complex64 = lambda
                        .iter()
                        .enumerate()
                        .map(|(m, l)| {
                            let theta = std::f64::consts::TAU * ((m * d) % n) as f64 / n as f64;
                            l * Complex64::from_polar(1.0, theta)
                        })
                        .sum::<Complex64>()
                        / n as f64;
                    for j in 0..n {
                        k[j * n + (j + n - d) % n] = v;
                    }
                }
            }
            Basis::Dense { vectors } => {
                for j in 0..n {
                    for l in 0..n {
                        k[j * n + l] = (0..n)
                            .map(|m| lambda[m] * vectors[(j, m)] * vectors[(l, m)])
                            .sum();
                    }
                }
            }
        }
        k
    }

    fn check_len(&self, values: &[Complex64]) -> Result<()> {
        if values.len() != self.n() {
            return Err(CvnnError::invalid(format!(
                "state has {} nodes, propagator has {}",
                values.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Node space to modal coefficients. The Fourier basis uses the
    /// unnormalized forward DFT; the dense basis is orthonormal.
    fn to_modal(&self, values: &[Complex64]) -> Vec<Complex64> {
        match &self.basis {
            Basis::Fourier { forward, .. } => {
                let mut buf = values.to_vec();
                forward.process(&mut buf);
                buf
            }
            Basis::Dense { vectors } => {
                let n = self.n();
                (0..n)
                    .map(|m| {
                        (0..n)
                            .map(|j| values[j] * vectors[(j, m)])
                            .sum::<Complex64>()
                    })
                    .collect()
            }
        }
    }

    fn from_modal(&self, mut coeffs: Vec<Complex64>) -> Vec<Complex64> {
        match &self.basis {
            Basis::Fourier { inverse, .. } => {
                inverse.process(&mut coeffs);
                let scale = 1.0 / self.n() as f64;
                coeffs.iter_mut().for_each(|c| *c *= scale);
                coeffs
            }
            Basis::Dense { vectors } => {
                let n = self.n();
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|m| coeffs[m] * vectors[(j, m)])
                            .sum::<Complex64>()
                    })
                    .collect()
            }
        }
    }

    /// Variance of unit node-space white noise after `to_modal`.
    fn modal_noise_scale(&self) -> f64 {
        match self.basis {
            Basis::Fourier { .. } => (self.n() as f64).sqrt(),
            Basis::Dense { .. } => 1.0,
        }
    }

    fn growth_check(&self, dt_s: f64) -> Result<()> {
        let (mode, exponent) = self
            .modal
            .iter()
            .map(|mu| mu.re * dt_s)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (m, e)| {
                if e > best.1 {
                    (m, e)
                } else {
                    best
                }
            });
        if exponent > MAX_EXPONENT {
            return Err(CvnnError::AmplitudeOverflow {
                mode,
                exponent,
                dt_s,
            });
        }
        Ok(())
    }

    fn factors(&self, dt_s: f64) -> Vec<Complex64> {
        self.modal.iter().map(|mu| (mu * dt_s).exp()).collect()
    }

    /// `x(t + dt) = e^{i omega dt} e^{K dt} x(t)`. Negative `dt_s` runs time
    /// backwards.
    pub fn evolve(&self, state: &NetworkState, dt_s: f64) -> Result<NetworkState> {
        if !dt_s.is_finite() {
            return Err(CvnnError::invalid("dt must be finite"));
        }
        self.check_len(&state.values)?;
        if dt_s == 0.0 {
            return Ok(state.clone());
        }
        self.growth_check(dt_s)?;
        let mut coeffs = self.to_modal(&state.values);
        for (c, f) in coeffs.iter_mut().zip(self.factors(dt_s)) {
            *c *= f;
        }
        let values = self.from_modal(coeffs);
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CvnnError::AmplitudeOverflow {
                mode: 0,
                exponent: f64::INFINITY,
                dt_s,
            });
        }
        Ok(NetworkState::new(values, state.time_s + dt_s))
    }

    /// Natural log of the inverse-propagation condition number over `dt_s`.
    pub fn log_condition(&self, dt_s: f64) -> f64 {
        let (lo, hi) = self
            .modal
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), mu| {
                (lo.min(mu.re), hi.max(mu.re))
            });
        (hi - lo) * dt_s.abs()
    }

    pub fn condition(&self, dt_s: f64) -> f64 {
        self.log_condition(dt_s).exp()
    }

    /// Fails with [`CvnnError::IllConditioned`] when the inverse over
    /// `dt_s` would amplify rounding beyond [`CONDITION_GUARD`].
    pub fn check_invertible(&self, dt_s: f64) -> Result<f64> {
        let log_kappa = self.log_condition(dt_s);
        if log_kappa > CONDITION_GUARD.ln() {
            return Err(CvnnError::IllConditioned { dt_s, log_kappa });
        }
        Ok(log_kappa.exp())
    }

    /// The state that evolves into `state` after `dt_s` seconds.
    pub fn evolve_inverse(&self, state: &NetworkState, dt_s: f64) -> Result<Inversion> {
        if !(dt_s >= 0.0 && dt_s.is_finite()) {
            return Err(CvnnError::invalid(format!(
                "inverse evolution needs finite dt >= 0, got {dt_s}"
            )));
        }
        let kappa = self.check_invertible(dt_s)?;
        Ok(Inversion {
            state: self.evolve(state, -dt_s)?,
            kappa,
        })
    }

    /// Euler-Maruyama: exact modal evolution over each step, then additive
    /// complex Gaussian noise with per-node variance `noise_std^2 * h`.
    /// White noise is invariant under the (scaled) unitary modal transform,
    /// so it is drawn directly in modal coordinates.
    pub fn evolve_noisy(
        &self,
        state: &NetworkState,
        dt_s: f64,
        step_s: f64,
        noise_std: f64,
        seed: u64,
    ) -> Result<NetworkState> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(CvnnError::invalid(format!(
                "noise_std must be >= 0, got {noise_std}"
            )));
        }
        if !(step_s > 0.0 && step_s.is_finite()) {
            return Err(CvnnError::invalid(format!("step must be > 0, got {step_s}")));
        }
        if !(dt_s >= 0.0 && dt_s.is_finite()) {
            return Err(CvnnError::invalid(format!(
                "noisy evolution needs finite dt >= 0, got {dt_s}"
            )));
        }
        self.check_len(&state.values)?;
        if dt_s == 0.0 {
            return Ok(state.clone());
        }
        self.growth_check(dt_s)?;

        let steps = (dt_s / step_s - 1e-9).ceil().max(1.0) as usize;
        let h = dt_s / steps as f64;
        let factors = self.factors(h);
        let sd = noise_std * (h / 2.0).sqrt() * self.modal_noise_scale();
        let mut rng = rng_from(seed, &[]);

        let mut coeffs = self.to_modal(&state.values);
        for _ in 0..steps {
            for (c, f) in coeffs.iter_mut().zip(&factors) {
                *c *= f;
            }
            if sd > 0.0 {
                for c in coeffs.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *c += Complex64::new(sd * re, sd * im);
                }
            }
        }
        Ok(NetworkState::new(self.from_modal(coeffs), state.time_s + dt_s))
    }

    /// `count` samples at `t0, t0 + step, ...` (exact evolution from `t0`).
    pub fn sample(&self, state: &NetworkState, count: usize, step_s: f64) -> Result<Trajectory> {
        self.check_len(&state.values)?;
        if count > 0 {
            self.growth_check(step_s * (count - 1) as f64)?;
        }
        let coeffs = self.to_modal(&state.values);
        let mut out = Trajectory::default();
        for k in 0..count {
            let t = step_s * k as f64;
            let c: Vec<Complex64> = coeffs
                .iter()
                .zip(&self.modal)
                .map(|(c, mu)| c * (mu * t).exp())
                .collect();
            out.push(state.time_s + t, self.from_modal(c));
        }
        Ok(out)
    }
}
