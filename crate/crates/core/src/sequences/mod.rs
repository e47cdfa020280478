//! Pulse-sequence IR and a simulator that executes it on the full
//! qubit ⊗ phonon Lindblad model.
//!
//! Simulator state lives in the bare phonon rotating frame. Phonon drives are
//! charge-line tones referenced to absolute time, so a phase written into a
//! segment is the LO phase at `t = 0` of the run.

mod experiments;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::device::{self, DeviceParams};
use crate::dynamics::{self, DriveTerm, Envelope, Integrator, LindbladModel, StaticPropagator};
use crate::error::{Error, Result};
use crate::hilbert::{self, Dims, QuantumState, Qubit};

pub use experiments::{
    uniform_grid, CardinalPoint, PhononProtocol, PhononReadout, PumpTone, RabiPoint, DEFAULT_FAR_DELTA, DEFAULT_PHONON_RABI,
    DEFAULT_RPN_POINTS, DEFAULT_RPN_WINDOW,
};

/// One step of a pulse sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSegment {
    QubitPi { phase: f64 },
    QubitPiHalf { phase: f64 },
    /// Resonant exchange in the `n`-excitation manifold, lasting `π/(2g√n)`.
    Iswap { manifold: u32 },
    /// Half of [`SequenceSegment::Iswap`].
    SqrtIswap { manifold: u32 },
    /// Instantaneous change of the qubit–phonon detuning.
    StarkShift { delta: f64 },
    Wait { duration: f64 },
    /// Charge-line tone at the dressed phonon frequency plus `detuning`,
    /// calibrated so the `|g0'⟩ ↔ |g1'⟩` Rabi rate equals `amplitude`.
    PhononDrive { amplitude: f64, phase: f64, duration: f64, detuning: f64 },
    QubitReset,
    MeasureQubit,
}

impl SequenceSegment {
    /// Wall-clock length; instantaneous pulses report zero.
    pub fn duration(&self, g: f64, pulses: &QubitPulseModel) -> f64 {
        match *self {
            Self::QubitPi { .. } | Self::QubitPiHalf { .. } => match pulses {
                QubitPulseModel::Instantaneous => 0.0,
                QubitPulseModel::Gaussian { duration, .. } => *duration,
            },
            Self::Iswap { manifold } => iswap_duration(g, manifold),
            Self::SqrtIswap { manifold } => 0.5 * iswap_duration(g, manifold),
            Self::Wait { duration } | Self::PhononDrive { duration, .. } => duration,
            Self::StarkShift { .. } | Self::QubitReset | Self::MeasureQubit => 0.0,
        }
    }

    pub fn phase(&self) -> f64 {
        match *self {
            Self::QubitPi { phase } | Self::QubitPiHalf { phase } | Self::PhononDrive { phase, .. } => phase,
            _ => 0.0,
        }
    }
}

/// `π/(2g√n)`: full exchange between `|e,n−1⟩` and `|g,n⟩` on resonance.
pub fn iswap_duration(g: f64, manifold: u32) -> f64 {
    PI / (2.0 * g * (manifold.max(1) as f64).sqrt())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub id: String,
    pub segments: Vec<SequenceSegment>,
}

impl PulseSequence {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), segments: Vec::new() }
    }

    pub fn then(mut self, s: SequenceSegment) -> Self {
        self.segments.push(s);
        self
    }

    pub fn extend(mut self, other: &PulseSequence) -> Self {
        self.segments.extend_from_slice(&other.segments);
        self
    }

    pub fn total_duration(&self, g: f64, pulses: &QubitPulseModel) -> f64 {
        self.segments.iter().map(|s| s.duration(g, pulses)).sum()
    }
}

/// How qubit π and π/2 pulses are realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum QubitPulseModel {
    #[default]
    Instantaneous,
    /// Finite gaussian pulses on the dressed qubit transition.
    Gaussian { duration: f64, sigma: f64 },
}

/// Excited-state probability versus a swept variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub sequence_id: String,
    pub delta: f64,
    pub times: Vec<f64>,
    pub p_excited: Vec<f64>,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Binomial resampling with `shots` repetitions per point.
    pub fn with_shot_noise(&self, shots: u64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut out = self.clone();
        for p in &mut out.p_excited {
            let b = Binomial::new(shots, p.clamp(0.0, 1.0)).map_err(|e| Error::ContractViolation(e.to_string()))?;
            *p = b.sample(rng) as f64 / shots as f64;
        }
        Ok(out)
    }

    pub fn with_contrast(&self, contrast: &ContrastModel) -> Self {
        let mut out = self.clone();
        for p in &mut out.p_excited {
            *p = contrast.offset + contrast.scale * *p;
        }
        out
    }

    /// True when the grid spacing is constant to 1e-9 relative.
    pub fn is_uniform(&self) -> bool {
        if self.times.len() < 3 {
            return true;
        }
        let dt = self.times[1] - self.times[0];
        self.times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(f64::MIN_POSITIVE))
    }
}

/// Affine readout `offset + scale · p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastModel {
    pub scale: f64,
    pub offset: f64,
}

impl ContrastModel {
    /// Maps measured values back onto probabilities.
    pub fn invert(&self, record: &MeasurementRecord) -> MeasurementRecord {
        let mut out = record.clone();
        for p in &mut out.p_excited {
            *p = (*p - self.offset) / self.scale;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub records: Vec<MeasurementRecord>,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
}

impl ExperimentResult {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), records: Vec::new(), metadata: BTreeMap::new(), seed: 0 }
    }

    pub fn with_shot_noise(&self, shots: u64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.records = self.records.iter().map(|r| r.with_shot_noise(shots, &mut rng)).collect::<Result<_>>()?;
        out.seed = seed;
        out.metadata.insert("shots".into(), shots.into());
        Ok(out)
    }

    pub fn insert(&mut self, key: &str, value: impl Serialize) {
        self.metadata.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }
}

/// Density matrix, clock and detuning carried through a sequence.
#[derive(Clone, Debug)]
pub struct SimState {
    pub rho: DMatrix<C64>,
    pub dims: Dims,
    /// Absolute time since the start of the run.
    pub t: f64,
    pub delta: f64,
    pub measurements: Vec<f64>,
    /// Accumulated integrator error estimate.
    pub error: f64,
}

impl SimState {
    pub fn ground(params: &DeviceParams) -> Self {
        let dims = params.dims();
        let rho = QuantumState::basis(dims, Qubit::Ground, 0).density_matrix();
        Self { rho, dims, t: 0.0, delta: params.delta, measurements: Vec::new(), error: 0.0 }
    }

    pub fn from_state(params: &DeviceParams, state: &QuantumState) -> Result<Self> {
        let dims = params.dims();
        let rho = match state.dims() {
            d if d == dims => state.density_matrix(),
            d if d == Dims::fock(dims.fock) => state.embed_with_ground_qubit()?.density_matrix(),
            d => return Err(Error::DimensionMismatch { expected: dims.total(), found: d.total() }),
        };
        Ok(Self { rho, dims, t: 0.0, delta: params.delta, measurements: Vec::new(), error: 0.0 })
    }

    pub fn state(&self) -> QuantumState {
        QuantumState::density_unchecked(self.dims, self.rho.clone())
    }

    pub fn excited_probability(&self) -> f64 {
        let f = self.dims.fock;
        (f..2 * f).map(|i| self.rho[(i, i)].re).sum::<f64>().clamp(0.0, 1.0)
    }

    pub fn phonon_populations(&self) -> Vec<f64> {
        self.state().phonon_populations()
    }

    pub fn mean_phonon_number(&self) -> f64 {
        self.phonon_populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Reduced phonon state seen from a frame rotating at `rate` with the phonon number.
    pub fn phonon_state_in_frame(&self, rate: f64) -> QuantumState {
        let mut rho = self.rho.clone();
        dynamics::rotate_excitations(&mut rho, self.dims, rate * self.t);
        QuantumState::density_unchecked(self.dims, rho).reduced_phonon()
    }

    fn reset_qubit(&mut self) {
        self.rho = self.state().with_qubit_reset().density_matrix();
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PropagatorKey([u64; 5]);

/// Executes sequences for one device; propagators are cached per
/// (detuning, frame, drive, duration).
pub struct Simulator {
    params: DeviceParams,
    integrator: Integrator,
    pulses: QubitPulseModel,
    lossless: bool,
    cache: Mutex<HashMap<PropagatorKey, Arc<StaticPropagator>>>,
}

impl Clone for Simulator {
    fn clone(&self) -> Self {
        Self::with_options(self.params, self.integrator, self.pulses, self.lossless)
    }
}

impl Simulator {
    pub fn new(params: DeviceParams) -> Self {
        Self::with_options(params, Integrator::default(), QubitPulseModel::Instantaneous, false)
    }

    pub fn with_options(params: DeviceParams, integrator: Integrator, pulses: QubitPulseModel, lossless: bool) -> Self {
        Self { params, integrator, pulses, lossless, cache: Mutex::new(HashMap::new()) }
    }

    /// Same device with every dissipation channel switched off.
    pub fn lossless(params: DeviceParams) -> Self {
        Self::with_options(params, Integrator::default(), QubitPulseModel::Instantaneous, true)
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integrator
    }

    pub fn is_lossless(&self) -> bool {
        self.lossless
    }

    pub(crate) fn model(&self, delta: f64) -> Result<LindbladModel> {
        let m = LindbladModel::jc(&self.params, delta)?;
        Ok(if self.lossless { m.lossless() } else { m })
    }

    fn propagator(&self, delta: f64, frame_rate: f64, drive: C64, duration: f64) -> Result<Arc<StaticPropagator>> {
        let key = PropagatorKey([delta.to_bits(), frame_rate.to_bits(), drive.re.to_bits(), drive.im.to_bits(), duration.to_bits()]);
        if let Some(p) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(p.clone());
        }
        let l = self.model(delta)?.static_liouvillian(frame_rate, drive);
        let p = Arc::new(StaticPropagator::new(&l, duration, self.integrator.max_step));
        self.cache.lock().expect("cache poisoned").insert(key, p.clone());
        Ok(p)
    }

    /// Free (undriven) evolution at `delta` for `duration`.
    pub(crate) fn free_evolve(&self, s: &mut SimState, delta: f64, duration: f64) -> Result<()> {
        if duration <= 0.0 {
            return Ok(());
        }
        let p = self.propagator(delta, 0.0, C64::new(0.0, 0.0), duration)?;
        self.apply(s, &p, duration)
    }

    fn apply(&self, s: &mut SimState, p: &StaticPropagator, duration: f64) -> Result<()> {
        let (v, e) = p.apply(&dynamics::vectorize(&s.rho));
        s.rho = dynamics::unvectorize(&v, s.dims.total());
        s.error += e;
        s.t += duration;
        if !(s.error <= self.integrator.tolerance) {
            return Err(Error::IntegrationFailure { max_local_error: s.error, tolerance: self.integrator.tolerance });
        }
        Ok(())
    }

    /// Charge-line drive held static in the frame rotating at `frame_rate`;
    /// `coefficient` multiplies σ− in that frame, its phase being the LO phase at `t = 0`.
    pub(crate) fn driven_evolve(&self, s: &mut SimState, frame_rate: f64, coefficient: C64, duration: f64) -> Result<()> {
        if duration <= 0.0 {
            return Ok(());
        }
        // The model is covariant under e^{−iφN}, so only |coefficient| needs a propagator.
        let phase = coefficient.arg();
        let p = self.propagator(s.delta, frame_rate, C64::new(coefficient.norm(), 0.0), duration)?;
        dynamics::rotate_excitations(&mut s.rho, s.dims, frame_rate * s.t + phase);
        self.apply(s, &p, duration)?;
        dynamics::rotate_excitations(&mut s.rho, s.dims, -(frame_rate * s.t + phase));
        Ok(())
    }

    /// Dressed `|g0'⟩ → |g1'⟩` frequency and the drive gain `|⟨e0|g1'⟩|` at `delta`.
    pub fn dressed_drive_calibration(&self, delta: f64) -> Result<(f64, f64)> {
        let spec = device::DressedSpectrum::new(delta, self.params.g, self.params.dim_fock)?;
        let shift = spec.energy(Qubit::Ground, 1) - spec.energy(Qubit::Ground, 0);
        let v = spec.state(Qubit::Ground, 1);
        let dims = self.params.dims();
        let qubit_part = v[hilbert::basis_index(dims, Qubit::Excited, 0)];
        let phonon_part = v[hilbert::basis_index(dims, Qubit::Ground, 1)];
        // sign of the qubit admixture relative to the phonon component
        let gain = qubit_part.norm() * if (qubit_part * phonon_part.conj()).re < 0.0 { -1.0 } else { 1.0 };
        Ok((shift, gain))
    }

    /// Drive frequency and σ− coefficient giving a `|g0'⟩ ↔ |g1'⟩` Rabi rate
    /// `amplitude` with rotation phase `phase`, whatever the sign of the admixture.
    pub(crate) fn phonon_drive_coefficient(&self, delta: f64, amplitude: f64, phase: f64) -> Result<(f64, C64)> {
        let (shift, gain) = self.dressed_drive_calibration(delta)?;
        let omega_q = amplitude / gain.abs();
        let sign_phase = if gain < 0.0 { PI } else { 0.0 };
        Ok((shift, C64::from_polar(0.5 * omega_q, phase + sign_phase)))
    }

    fn qubit_pulse(&self, s: &mut SimState, angle: f64, phase: f64) -> Result<()> {
        match self.pulses {
            QubitPulseModel::Instantaneous => {
                let u = qubit_rotation(s.dims.fock, angle, phase);
                s.rho = dynamics::conjugate(&u, &s.rho);
                Ok(())
            }
            QubitPulseModel::Gaussian { duration, sigma } => {
                let spec = device::DressedSpectrum::new(s.delta, self.params.g, self.params.dim_fock)?;
                let freq = spec.energy(Qubit::Excited, 0) - spec.energy(Qubit::Ground, 0);
                let drive = DriveTerm {
                    amplitude: angle / duration,
                    frequency: freq,
                    phase,
                    envelope: Envelope::Gaussian { sigma },
                    start: 0.0,
                    duration,
                };
                let mut model = self.model(s.delta)?.with_drive(drive)?;
                // a zero-amplitude companion keeps the gaussian on the time-dependent path
                model.drives.push(DriveTerm { amplitude: 0.0, ..drive });
                let out = dynamics::evolve_with(&model, &s.state(), &[duration], &self.integrator)?;
                s.rho = out[0].density_matrix();
                s.t += duration;
                Ok(())
            }
        }
    }

    /// Applies one segment in place.
    pub fn step(&self, s: &mut SimState, seg: &SequenceSegment) -> Result<()> {
        let g = self.params.g;
        match *seg {
            SequenceSegment::QubitPi { phase } => self.qubit_pulse(s, PI, phase),
            SequenceSegment::QubitPiHalf { phase } => self.qubit_pulse(s, 0.5 * PI, phase),
            SequenceSegment::Iswap { manifold } => self.free_evolve(s, 0.0, iswap_duration(g, manifold)),
            SequenceSegment::SqrtIswap { manifold } => self.free_evolve(s, 0.0, 0.5 * iswap_duration(g, manifold)),
            SequenceSegment::StarkShift { delta } => {
                if delta == 0.0 {
                    return Err(Error::OutsideDispersiveRegime { delta });
                }
                s.delta = delta;
                Ok(())
            }
            SequenceSegment::Wait { duration } => {
                let delta = s.delta;
                self.free_evolve(s, delta, duration)
            }
            SequenceSegment::PhononDrive { amplitude, phase, duration, detuning } => {
                if amplitude == 0.0 {
                    let delta = s.delta;
                    return self.free_evolve(s, delta, duration);
                }
                let (shift, coeff) = self.phonon_drive_coefficient(s.delta, amplitude, phase)?;
                self.driven_evolve(s, shift + detuning, coeff, duration)
            }
            SequenceSegment::QubitReset => {
                s.reset_qubit();
                Ok(())
            }
            SequenceSegment::MeasureQubit => {
                dynamics::audit_state(s.dims, s.rho.clone())?;
                s.measurements.push(s.excited_probability());
                Ok(())
            }
        }
    }

    pub fn run_from(&self, mut s: SimState, seq: &PulseSequence) -> Result<SimState> {
        for seg in &seq.segments {
            self.step(&mut s, seg)?;
        }
        Ok(s)
    }

    /// Runs `seq` from `|g,0⟩` at the operating detuning.
    pub fn run(&self, seq: &PulseSequence) -> Result<SimState> {
        self.run_from(SimState::ground(&self.params), seq)
    }
}

/// `cos(θ/2) − i sin(θ/2)(e^{iφ}σ− + e^{−iφ}σ+)` on the qubit, identity on the phonon.
pub fn qubit_rotation(dim_fock: usize, angle: f64, phase: f64) -> DMatrix<C64> {
    let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
    let minus_i = C64::new(0.0, -1.0);
    let r = DMatrix::from_row_slice(2, 2, &[
        C64::new(c, 0.0), minus_i * s * C64::from_polar(1.0, phase),
        minus_i * s * C64::from_polar(1.0, -phase), C64::new(c, 0.0),
    ]);
    r.kronecker(&DMatrix::identity(dim_fock, dim_fock))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pi_pulse_flips_qubit() {
        let p = DeviceParams { dim_fock: 3, ..DeviceParams::default() };
        let sim = Simulator::new(p);
        let s = sim.run(&PulseSequence::new("pi").then(SequenceSegment::QubitPi { phase: 0.3 })).unwrap();
        assert_abs_diff_eq!(s.excited_probability(), 1.0, epsilon = 1e-14);
        let s = sim.run(&PulseSequence::new("half").then(SequenceSegment::QubitPiHalf { phase: 0.0 })).unwrap();
        assert_abs_diff_eq!(s.excited_probability(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn iswap_durations() {
        let g = DeviceParams::default().g;
        assert_abs_diff_eq!(iswap_duration(g, 1), PI / (2.0 * g));
        let seq = SequenceSegment::SqrtIswap { manifold: 1 };
        assert_abs_diff_eq!(seq.duration(g, &QubitPulseModel::Instantaneous), PI / (4.0 * g));
    }

    #[test]
    fn lossless_iswap_transfers_excitation() {
        let p = DeviceParams { dim_fock: 4, ..DeviceParams::default() };
        let sim = Simulator::lossless(p);
        let seq = PulseSequence::new("swap")
            .then(SequenceSegment::QubitPi { phase: 0.0 })
            .then(SequenceSegment::Iswap { manifold: 1 })
            .then(SequenceSegment::MeasureQubit);
        let s = sim.run(&seq).unwrap();
        assert!(s.measurements[0] < 1e-8);
        assert_abs_diff_eq!(s.phonon_populations()[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn shot_noise_is_seeded() {
        let r = MeasurementRecord { sequence_id: "x".into(), delta: 0.0, times: vec![0.0, 1.0], p_excited: vec![0.3, 0.7] };
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(r.with_shot_noise(100, &mut a).unwrap(), r.with_shot_noise(100, &mut b).unwrap());
    }

    #[test]
    fn contrast_round_trip() {
        let r = MeasurementRecord { sequence_id: "x".into(), delta: 0.0, times: vec![0.0], p_excited: vec![0.25] };
        let c = ContrastModel { scale: 0.8, offset: 0.05 };
        assert_abs_diff_eq!(c.invert(&r.with_contrast(&c)).p_excited[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn segment_json_is_tagged() {
        let s = serde_json::to_string(&SequenceSegment::Wait { duration: 1e-6 }).unwrap();
        assert_eq!(s, r#"{"kind":"wait","duration":1e-6}"#);
    }
}
