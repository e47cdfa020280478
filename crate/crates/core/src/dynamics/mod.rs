//! Open-system dynamics: Lindblad models with charge-line drives, a fixed-step
//! RK4 integrator, and closed-form oracles.
//!
//! States are kept in the frame rotating at the bare phonon frequency. A
//! charge-line drive at offset `δ` from that frame enters as
//! `(Ω f(t)/2)(e^{i(φ+δt)} σ− + h.c.)`.

mod kerr;
mod superop;

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::device::{self, DeviceParams};
use crate::error::{Error, Result};
use crate::hilbert::{self, Dims, Operator, QuantumState};

pub use kerr::{analytic_kerr_evolution, kerr_model};
pub use superop::StaticPropagator;
pub(crate) use superop::{commutator_superop, dissipator_superop, unvectorize, vectorize};

/// Collapse channel `rate · D[operator]`.
#[derive(Clone, Debug)]
pub struct CollapseOp {
    pub label: String,
    pub operator: Operator,
    pub rate: f64,
}

impl CollapseOp {
    pub fn new(label: impl Into<String>, operator: Operator, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::ContractViolation(format!("collapse rate must be non-negative, got {rate}")));
        }
        Ok(Self { label: label.into(), operator, rate })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    Rectangular,
    /// Truncated gaussian centred in the window, rescaled to the rectangular area.
    Gaussian { sigma: f64 },
}

/// Charge-line drive on the qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveTerm {
    /// Peak-equivalent Rabi rate `Ω` (rad/s); the rectangular pulse of the same area has this height.
    pub amplitude: f64,
    /// Offset of the drive tone from the phonon frame (rad/s).
    pub frequency: f64,
    pub phase: f64,
    pub envelope: Envelope,
    pub start: f64,
    pub duration: f64,
}

impl DriveTerm {
    pub fn rectangular(amplitude: f64, frequency: f64, phase: f64, start: f64, duration: f64) -> Result<Self> {
        let d = Self { amplitude, frequency, phase, envelope: Envelope::Rectangular, start, duration };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(Error::ContractViolation(format!("drive amplitude must be non-negative, got {}", self.amplitude)));
        }
        if !(self.duration >= 0.0) {
            return Err(Error::ContractViolation(format!("drive duration must be non-negative, got {}", self.duration)));
        }
        if let Envelope::Gaussian { sigma } = self.envelope {
            if !(sigma > 0.0) {
                return Err(Error::ContractViolation(format!("gaussian sigma must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// `amplitude · duration`, the rotation angle of a resonant pulse.
    pub fn pulse_area(&self) -> f64 {
        self.amplitude * self.duration
    }

    fn gaussian_norm(&self, sigma: f64) -> f64 {
        // composite Simpson over the window; the integrand is smooth
        let n = 4096;
        let h = self.duration / n as f64;
        let mid = 0.5 * self.duration;
        let f = |t: f64| (-(t - mid).powi(2) / (2.0 * sigma * sigma)).exp();
        let mut s = f(0.0) + f(self.duration);
        for k in 1..n {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        self.duration / (s * h / 3.0)
    }

    /// Envelope value in units of `amplitude` at absolute time `t`.
    pub fn shape(&self, t: f64) -> f64 {
        if t < self.start || t > self.end() || self.duration == 0.0 {
            return 0.0;
        }
        match self.envelope {
            Envelope::Rectangular => 1.0,
            Envelope::Gaussian { sigma } => {
                let u = t - self.start - 0.5 * self.duration;
                self.gaussian_norm(sigma) * (-u * u / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// Coefficient of σ− in the Hamiltonian at time `t`.
    fn coefficient(&self, t: f64, norm: f64) -> C64 {
        if t < self.start || t > self.end() {
            return C64::new(0.0, 0.0);
        }
        let shape = match self.envelope {
            Envelope::Rectangular => 1.0,
            Envelope::Gaussian { sigma } => {
                let u = t - self.start - 0.5 * self.duration;
                norm * (-u * u / (2.0 * sigma * sigma)).exp()
            }
        };
        C64::from_polar(0.5 * self.amplitude * shape, self.phase + self.frequency * t)
    }
}

/// Fixed-step RK4 settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub max_step: f64,
    /// Bound on the accumulated step-halving error estimate (l1 norm of vec ρ).
    pub tolerance: f64,
    /// Step interval between halving probes on the time-dependent path.
    pub probe_every: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { max_step: 1e-9, tolerance: 1e-6, probe_every: 1000 }
    }
}

/// Static Hamiltonian, charge-line drives and collapse channels.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub hamiltonian: Operator,
    pub drives: Vec<DriveTerm>,
    pub collapse: Vec<CollapseOp>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, collapse: Vec<CollapseOp>) -> Result<Self> {
        if !hamiltonian.is_hermitian(1e-12) {
            return Err(Error::ContractViolation("Hamiltonian is not Hermitian".into()));
        }
        for c in &collapse {
            if c.operator.dims() != hamiltonian.dims() {
                return Err(Error::DimensionMismatch { expected: hamiltonian.dim(), found: c.operator.dim() });
            }
        }
        Ok(Self { hamiltonian, drives: Vec::new(), collapse })
    }

    /// Rotating-frame JC model at detuning `delta` with the four device channels.
    pub fn jc(params: &DeviceParams, delta: f64) -> Result<Self> {
        let h = device::jc_hamiltonian(delta, params.g, params.dim_fock)?;
        Self::new(h, device_collapse_ops(params)?)
    }

    /// Same Hamiltonian with every rate set to zero.
    pub fn lossless(&self) -> Self {
        Self { collapse: Vec::new(), ..self.clone() }
    }

    pub fn with_drive(mut self, drive: DriveTerm) -> Result<Self> {
        drive.validate()?;
        if self.dims().qubit != 2 {
            return Err(Error::InvalidDimension("charge-line drives need a qubit factor".into()));
        }
        self.drives.push(drive);
        Ok(self)
    }

    pub fn dims(&self) -> Dims {
        self.hamiltonian.dims()
    }

    fn dissipative_superop(&self) -> DMatrix<C64> {
        let n = self.dims().total();
        let mut l = DMatrix::zeros(n * n, n * n);
        for c in &self.collapse {
            if c.rate > 0.0 {
                l += dissipator_superop(c.operator.matrix(), c.rate);
            }
        }
        l
    }

    /// Liouvillian of the static part in a frame rotating at `frame_rate` with
    /// the excitation number, plus an optional static drive of coefficient `a`.
    pub(crate) fn static_liouvillian(&self, frame_rate: f64, drive: C64) -> DMatrix<C64> {
        let dims = self.dims();
        let mut h = self.hamiltonian.matrix().clone();
        if frame_rate != 0.0 {
            for (i, k) in excitation_numbers(dims).into_iter().enumerate() {
                h[(i, i)] -= C64::new(frame_rate * k, 0.0);
            }
        }
        if drive.norm() > 0.0 {
            let sm = hilbert::sigma_minus().on_qubit(dims.fock).expect("qubit factor");
            let term = sm.matrix() * drive;
            h += &term + term.adjoint();
        }
        commutator_superop(&h) + self.dissipative_superop()
    }

    /// Drives that reduce to a static term in a single rotating frame over `[0, t_end]`.
    fn static_frame(&self, t_end: f64) -> Option<(f64, C64)> {
        match self.drives.as_slice() {
            [] => Some((0.0, C64::new(0.0, 0.0))),
            [d] if d.envelope == Envelope::Rectangular && d.start <= 0.0 && d.end() >= t_end => {
                Some((d.frequency, C64::from_polar(0.5 * d.amplitude, d.phase)))
            }
            _ => None,
        }
    }
}

/// Phonon decay `p`, phonon dephasing `p†p` at `2γφ`, qubit decay `σ−` and qubit dephasing `σz`.
pub fn device_collapse_ops(params: &DeviceParams) -> Result<Vec<CollapseOp>> {
    let n = params.dim_fock;
    let p = hilbert::annihilation(n)?.on_fock()?;
    let num = hilbert::number(n)?.on_fock()?;
    Ok(vec![
        CollapseOp::new("phonon_decay", p, params.phonon_gamma1())?,
        CollapseOp::new("phonon_dephasing", num, 2.0 * params.phonon_gamma_phi())?,
        CollapseOp::new("qubit_decay", hilbert::sigma_minus().on_qubit(n)?, params.qubit_gamma1())?,
        CollapseOp::new("qubit_dephasing", hilbert::sigma_z().on_qubit(n)?, params.qubit_sigma_z_rate())?,
    ])
}

/// Eigenvalues of `p†p + σ+σ−` on the composite basis.
pub(crate) fn excitation_numbers(dims: Dims) -> Vec<f64> {
    (0..dims.total()).map(|i| ((i / dims.fock) + (i % dims.fock)) as f64).collect()
}

/// `e^{iθN} ρ e^{−iθN}` with `N` the excitation number.
pub(crate) fn rotate_excitations(rho: &mut DMatrix<C64>, dims: Dims, theta: f64) {
    if theta == 0.0 {
        return;
    }
    let ns = excitation_numbers(dims);
    for j in 0..ns.len() {
        for i in 0..ns.len() {
            if ns[i] != ns[j] {
                rho[(i, j)] *= C64::from_polar(1.0, theta * (ns[i] - ns[j]));
            }
        }
    }
}

/// Checks trace, Hermiticity and positivity of an evolved state. Negativity
/// down to `POSITIVITY_FLOOR` only warns.
pub(crate) fn audit_state(dims: Dims, mut rho: DMatrix<C64>) -> Result<QuantumState> {
    hilbert::hermitize(&mut rho);
    let state = QuantumState::density_unchecked(dims, rho);
    let min = state.min_eigenvalue();
    if min < hilbert::POSITIVITY_FLOOR {
        return Err(Error::Positivity { min_eigenvalue: min });
    }
    if min < -1e-12 {
        log::warn!("evolved state has slightly negative eigenvalue {min:e}");
    }
    Ok(state)
}

/// Evolves `rho0` and returns the state at every time in `t_grid`.
pub fn evolve(model: &LindbladModel, rho0: &QuantumState, t_grid: &[f64]) -> Result<Vec<QuantumState>> {
    evolve_with(model, rho0, t_grid, &Integrator::default())
}

pub fn evolve_with(model: &LindbladModel, rho0: &QuantumState, t_grid: &[f64], integ: &Integrator) -> Result<Vec<QuantumState>> {
    let dims = model.dims();
    if rho0.dims() != dims {
        return Err(Error::DimensionMismatch { expected: dims.total(), found: rho0.dims().total() });
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::ContractViolation("time grid must be ascending and non-negative".into()));
    }
    let Some(&t_end) = t_grid.last() else { return Ok(Vec::new()) };
    let d = dims.total();
    let mut err = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());

    if let Some((frame_rate, drive)) = model.static_frame(t_end) {
        let l = model.static_liouvillian(frame_rate, drive);
        let mut cache: Vec<(u64, StaticPropagator)> = Vec::new();
        let mut v = vectorize(&rho0.density_matrix());
        let mut t = 0.0;
        for &target in t_grid {
            let dt = target - t;
            let key = dt.to_bits();
            let idx = match cache.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    cache.push((key, StaticPropagator::new(&l, dt, integ.max_step)));
                    cache.len() - 1
                }
            };
            let (next, e) = cache[idx].1.apply(&v);
            v = next;
            err += e;
            check_error(err, integ)?;
            t = target;
            let mut rho = unvectorize(&v, d);
            rotate_excitations(&mut rho, dims, -frame_rate * t);
            out.push(audit_state(dims, rho)?);
        }
    } else {
        let base = superop::to_csr(&model.static_liouvillian(0.0, C64::new(0.0, 0.0)));
        let sm = hilbert::sigma_minus().on_qubit(dims.fock)?;
        let lower = superop::to_csr(&commutator_superop(sm.matrix()));
        let raise = superop::to_csr(&commutator_superop(&sm.matrix().adjoint()));
        let norms: Vec<f64> = model
            .drives
            .iter()
            .map(|dr| match dr.envelope {
                Envelope::Gaussian { sigma } if dr.duration > 0.0 => dr.gaussian_norm(sigma),
                _ => 1.0,
            })
            .collect();
        let amplitude = |t: f64| -> C64 { model.drives.iter().zip(&norms).map(|(dr, &nm)| dr.coefficient(t, nm)).sum() };
        let driven = superop::DrivenLiouvillian { base, lower, raise, amplitude: &amplitude };
        let mut v = vectorize(&rho0.density_matrix());
        let mut t = 0.0;
        for &target in t_grid {
            err += driven.integrate(&mut v, t, target, integ.max_step, integ.probe_every.max(1));
            check_error(err, integ)?;
            t = target;
            out.push(audit_state(dims, unvectorize(&v, d))?);
        }
    }
    Ok(out)
}

fn check_error(err: f64, integ: &Integrator) -> Result<()> {
    if !(err <= integ.tolerance) {
        return Err(Error::IntegrationFailure { max_local_error: err, tolerance: integ.tolerance });
    }
    Ok(())
}

/// Direct phonon Rabi rate `|g/Δ| Ω_q` from the first-order Schrieffer–Wolff drive term.
pub fn effective_phonon_drive(params: &DeviceParams, delta: f64, omega_q_drive: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::OutsideDispersiveRegime { delta });
    }
    Ok((params.g / delta).abs() * omega_q_drive)
}

/// Exact `|g0'⟩ ↔ |g1'⟩` Rabi rate for a charge-line drive: `|⟨e0|g1'⟩| Ω_q`.
pub fn dressed_phonon_drive(params: &DeviceParams, delta: f64, omega_q_drive: f64) -> Result<f64> {
    Ok(device::dressed_coupling(delta, params.g)? * omega_q_drive)
}

/// Writes `t_s, P_g0 … P_g{N−1}, P_e0 … P_e{N−1}` rows.
pub fn write_trajectory_csv<W: Write>(writer: W, times: &[f64], states: &[QuantumState]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let Some(first) = states.first() else { return Ok(()) };
    let dims = first.dims();
    let mut header = vec!["t_s".to_string()];
    for q in ["g", "e"].iter().take(dims.qubit) {
        for n in 0..dims.fock {
            header.push(format!("P_{q}{n}"));
        }
    }
    w.write_record(&header)?;
    for (t, s) in times.iter().zip(states) {
        let mut row = vec![format!("{t:e}")];
        row.extend(s.populations().iter().map(|p| format!("{p:.12e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `U ρ U†`.
pub(crate) fn conjugate(u: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    u * rho * u.adjoint()
}
