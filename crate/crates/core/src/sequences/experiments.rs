//! Experiment protocols built from [`SequenceSegment`]s.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentResult, MeasurementRecord, PulseSequence, SequenceSegment as Seg, SimState, Simulator};
use crate::device;
use crate::dynamics::{self, DriveTerm, Envelope};
use crate::error::{Error, Result};
use crate::hilbert::{Dims, QuantumState};

/// Direct phonon Rabi rate used by the mechanical-qubit protocols.
pub const DEFAULT_PHONON_RABI: f64 = TAU * 10.6e3;
/// Resonant-interaction window of an RPN record.
pub const DEFAULT_RPN_WINDOW: f64 = 6e-6;
pub const DEFAULT_RPN_POINTS: usize = 101;
/// Parking detuning for free phonon decay.
pub const DEFAULT_FAR_DELTA: f64 = TAU * -4e6;

/// `n_points` equally spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n_points: usize) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect(),
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::ContractViolation("time list must be ascending and non-negative".into()));
    }
    Ok(())
}

/// How the phonon population is read out in the coherence protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhononReadout {
    /// Qubit reset, iSWAP, qubit excited-state probability.
    Swap,
    /// Number-resolved readout reporting `⟨n⟩`.
    MeanNumber,
}

/// Second tone used to hold population in `|g1'⟩` during spectroscopy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpTone {
    /// Phonon Rabi rate on `|g0'⟩ ↔ |g1'⟩`.
    pub amplitude: f64,
    /// Offset from the dressed `|g0'⟩ → |g1'⟩` frequency.
    pub detuning: f64,
}

/// State of the driven phonon after one Rabi duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiPoint {
    pub duration: f64,
    pub phonon_populations: Vec<f64>,
    /// Bare qubit excited-state probability right after the drive.
    pub qubit_excited: f64,
    pub rpn: MeasurementRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardinalPoint {
    Plus,
    Minus,
    PlusI,
    MinusI,
    Zero,
    One,
}

impl CardinalPoint {
    /// Direct phonon pulse at Rabi rate `amplitude` preparing this point from vacuum.
    pub fn preparation(self, amplitude: f64) -> PulseSequence {
        let seq = PulseSequence::new(format!("prepare_{}", self.name()));
        match self.pulse() {
            None => seq,
            Some((angle, phase)) => seq.then(Seg::PhononDrive { amplitude, phase, duration: angle / amplitude, detuning: 0.0 }),
        }
    }

    pub const ALL: [CardinalPoint; 6] = [Self::Minus, Self::MinusI, Self::Plus, Self::PlusI, Self::Zero, Self::One];

    pub fn name(self) -> &'static str {
        match self {
            Self::Plus => "plus",
            Self::Minus => "minus",
            Self::PlusI => "plus_i",
            Self::MinusI => "minus_i",
            Self::Zero => "zero",
            Self::One => "one",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Ideal target state on a `dim_fock`-level phonon.
    pub fn target(self, dim_fock: usize) -> QuantumState {
        let mut v = DVector::zeros(dim_fock);
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Self::Zero => v[0] = C64::new(1.0, 0.0),
            Self::One => v[1] = C64::new(1.0, 0.0),
            Self::Plus => (v[0], v[1]) = (h, h),
            Self::Minus => (v[0], v[1]) = (h, -h),
            Self::PlusI => (v[0], v[1]) = (h, h * C64::new(0.0, 1.0)),
            Self::MinusI => (v[0], v[1]) = (h, h * C64::new(0.0, -1.0)),
        }
        QuantumState::Ket { dims: Dims::fock(dim_fock), amplitudes: v }
    }

    /// Rotation angle and LO phase; a pulse of phase `φ` maps `|0⟩` to
    /// `cos(θ/2)|0⟩ − i e^{−iφ} sin(θ/2)|1⟩`.
    pub fn pulse(self) -> Option<(f64, f64)> {
        match self {
            Self::Zero => None,
            Self::One => Some((PI, 0.0)),
            Self::Plus => Some((0.5 * PI, -0.5 * PI)),
            Self::Minus => Some((0.5 * PI, 0.5 * PI)),
            Self::PlusI => Some((0.5 * PI, PI)),
            Self::MinusI => Some((0.5 * PI, 0.0)),
        }
    }
}

/// Settings shared by the direct-pulse T1/T2 protocols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhononProtocol {
    pub drive_amplitude: f64,
    pub far_delta: f64,
    pub readout: PhononReadout,
}

impl Default for PhononProtocol {
    fn default() -> Self {
        Self { drive_amplitude: DEFAULT_PHONON_RABI, far_delta: DEFAULT_FAR_DELTA, readout: PhononReadout::Swap }
    }
}

impl Simulator {
    /// Steps `s` through `times` (absolute offsets from the current state)
    /// with free evolution at `delta`, calling `visit` at every time.
    fn sweep_wait<T>(&self, s: SimState, delta: f64, times: &[f64], mut visit: impl FnMut(&SimState) -> Result<T>) -> Result<Vec<T>> {
        check_grid(times)?;
        let mut cur = s;
        let mut last = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            self.free_evolve(&mut cur, delta, t - last)?;
            last = t;
            out.push(visit(&cur)?);
        }
        Ok(out)
    }

    /// RPN trace of the phonon in `s`: reset the qubit, excite it, and record
    /// `P_e` after resonant interaction for each time in `times`.
    pub fn rpn_trace(&self, s: &SimState, times: &[f64]) -> Result<Vec<f64>> {
        let mut start = s.clone();
        self.step(&mut start, &Seg::QubitReset)?;
        self.step(&mut start, &Seg::QubitPi { phase: 0.0 })?;
        self.sweep_wait(start, 0.0, times, |c| {
            dynamics::audit_state(c.dims, c.rho.clone())?;
            Ok(c.excited_probability())
        })
    }

    /// RPN trace for a phonon-only input state.
    pub fn rpn_trace_for_phonon(&self, phonon: &QuantumState, times: &[f64]) -> Result<Vec<f64>> {
        self.rpn_trace(&SimState::from_state(&self.params, phonon)?, times)
    }

    pub fn run_rpn(&self, state_prep: &PulseSequence, t_max: f64, n_points: usize) -> Result<MeasurementRecord> {
        let s = self.run(state_prep)?;
        if s.excited_probability() > 1e-3 {
            log::warn!("state preparation leaves qubit excited with probability {:.3e}", s.excited_probability());
        }
        let times = uniform_grid(t_max, n_points);
        let p = self.rpn_trace(&s, &times)?;
        Ok(MeasurementRecord { sequence_id: format!("rpn/{}", state_prep.id), delta: 0.0, times, p_excited: p })
    }

    /// Interferometric anharmonicity measurement: prepare `(|0⟩+|2⟩)/√2`,
    /// wait at `delta`, map back with the final π pulse advanced by
    /// `(δm − ω_AD) t`, and read the qubit.
    pub fn run_ramsey_anharmonicity(&self, delta: f64, omega_ad: f64, t_max: f64, n_points: usize) -> Result<MeasurementRecord> {
        let limit = 2.0 * self.params.g;
        if delta.abs() <= limit {
            return Err(Error::InsideAvoidedCrossing { delta_prime: delta, limit });
        }
        let (shift, _) = self.dressed_drive_calibration(delta)?;
        let generate = PulseSequence::new("ramsey_generate")
            .then(Seg::QubitPi { phase: 0.0 })
            .then(Seg::SqrtIswap { manifold: 1 })
            .then(Seg::QubitPi { phase: 0.0 })
            .then(Seg::Iswap { manifold: 2 })
            .then(Seg::StarkShift { delta });
        let s = self.run(&generate)?;
        let t0 = s.t;
        let times = uniform_grid(t_max, n_points);
        let p = self.sweep_wait(s, delta, &times, |c| {
            let phase = (shift - omega_ad) * (c.t - t0);
            let readout = PulseSequence::new("ramsey_readout")
                .then(Seg::Iswap { manifold: 2 })
                .then(Seg::QubitPi { phase })
                .then(Seg::SqrtIswap { manifold: 1 })
                .then(Seg::MeasureQubit);
            Ok(self.run_from(c.clone(), &readout)?.measurements[0])
        })?;
        Ok(MeasurementRecord { sequence_id: "ramsey_anharmonicity".into(), delta, times, p_excited: p })
    }

    /// Direct phonon drive at the operating detuning for each duration in
    /// `t_list`, followed by population and RPN readout.
    pub fn mech_rabi_points(&self, omega_drive: f64, phase: f64, t_list: &[f64]) -> Result<Vec<RabiPoint>> {
        check_grid(t_list)?;
        let delta = self.params.delta;
        let (shift, coeff) = self.phonon_drive_coefficient(delta, omega_drive, phase)?;
        let rpn_times = uniform_grid(DEFAULT_RPN_WINDOW, DEFAULT_RPN_POINTS);
        let mut s = SimState::ground(&self.params);
        let mut out = Vec::with_capacity(t_list.len());
        for &t in t_list {
            let dt = t - s.t;
            if omega_drive == 0.0 {
                self.free_evolve(&mut s, delta, dt)?;
            } else {
                self.driven_evolve(&mut s, shift, coeff, dt)?;
            }
            let p = self.rpn_trace(&s, &rpn_times)?;
            out.push(RabiPoint {
                duration: t,
                phonon_populations: s.phonon_populations(),
                qubit_excited: s.excited_probability(),
                rpn: MeasurementRecord { sequence_id: format!("mech_rabi/t={t:e}"), delta: 0.0, times: rpn_times.clone(), p_excited: p },
            });
        }
        Ok(out)
    }

    pub fn run_mech_rabi(&self, omega_drive: f64, phase: f64, t_list: &[f64]) -> Result<ExperimentResult> {
        let points = self.mech_rabi_points(omega_drive, phase, t_list)?;
        let mut r = ExperimentResult::new("mech_rabi");
        r.insert("omega_drive_rad_s", omega_drive);
        r.insert("phase_rad", phase);
        r.insert("durations_s", t_list);
        r.insert("phonon_populations", points.iter().map(|p| p.phonon_populations.clone()).collect::<Vec<_>>());
        r.insert("qubit_excited", points.iter().map(|p| p.qubit_excited).collect::<Vec<_>>());
        let estimate: Vec<f64> = points
            .iter()
            .map(|p| device::qubit_population_estimate(self.params.delta, self.params.g, &p.phonon_populations))
            .collect::<Result<_>>()?;
        r.insert("dressed_qubit_estimate", estimate);
        r.records = points.into_iter().map(|p| p.rpn).collect();
        Ok(r)
    }

    fn phonon_readout(&self, c: &SimState, readout: PhononReadout) -> Result<f64> {
        match readout {
            PhononReadout::MeanNumber => Ok(c.mean_phonon_number()),
            PhononReadout::Swap => {
                let seq = PulseSequence::new("swap_readout").then(Seg::QubitReset).then(Seg::Iswap { manifold: 1 }).then(Seg::MeasureQubit);
                Ok(self.run_from(c.clone(), &seq)?.measurements[0])
            }
        }
    }

    /// Direct π pulse, free decay at `far_delta`, phonon readout.
    pub fn run_phonon_t1(&self, t_list: &[f64], protocol: &PhononProtocol) -> Result<MeasurementRecord> {
        let prep = PulseSequence::new("t1_prep")
            .then(Seg::PhononDrive { amplitude: protocol.drive_amplitude, phase: 0.0, duration: PI / protocol.drive_amplitude, detuning: 0.0 })
            .then(Seg::StarkShift { delta: protocol.far_delta });
        let s = self.run(&prep)?;
        let values = self.sweep_wait(s, protocol.far_delta, t_list, |c| self.phonon_readout(c, protocol.readout))?;
        Ok(MeasurementRecord {
            sequence_id: format!("phonon_t1/{}", readout_name(protocol.readout)),
            delta: protocol.far_delta,
            times: t_list.to_vec(),
            p_excited: values,
        })
    }

    /// Direct π/2 – free evolution at `far_delta` – π/2 with the second
    /// pulse phase advanced by the frame mismatch plus `artificial_detuning · t`.
    pub fn run_phonon_t2_ramsey(&self, t_list: &[f64], artificial_detuning: f64, protocol: &PhononProtocol) -> Result<MeasurementRecord> {
        let op = self.params.delta;
        let half = 0.5 * PI / protocol.drive_amplitude;
        let (shift_op, _) = self.dressed_drive_calibration(op)?;
        let (shift_far, _) = self.dressed_drive_calibration(protocol.far_delta)?;
        let prep = PulseSequence::new("t2_prep")
            .then(Seg::PhononDrive { amplitude: protocol.drive_amplitude, phase: 0.0, duration: half, detuning: 0.0 })
            .then(Seg::StarkShift { delta: protocol.far_delta });
        let s = self.run(&prep)?;
        let values = self.sweep_wait(s, protocol.far_delta, t_list, |c| {
            let t = c.t - half;
            let phase = (shift_far - shift_op) * t + artificial_detuning * t;
            let close = PulseSequence::new("t2_close")
                .then(Seg::StarkShift { delta: op })
                .then(Seg::PhononDrive { amplitude: protocol.drive_amplitude, phase, duration: half, detuning: 0.0 });
            let done = self.run_from(c.clone(), &close)?;
            self.phonon_readout(&done, protocol.readout)
        })?;
        Ok(MeasurementRecord {
            sequence_id: format!("phonon_t2/{}", readout_name(protocol.readout)),
            delta: protocol.far_delta,
            times: t_list.to_vec(),
            p_excited: values,
        })
    }

    /// Probe (and optional pump) tone at `delta`, then RPN and population readout per probe detuning.
    pub fn run_spectroscopy(
        &self,
        delta: f64,
        probe_detunings: &[f64],
        probe_duration: f64,
        probe_amplitude: f64,
        pump: Option<PumpTone>,
    ) -> Result<ExperimentResult> {
        if !(probe_duration > 0.0) {
            return Err(Error::ContractViolation(format!("probe duration must be positive, got {probe_duration}")));
        }
        let rpn_times = uniform_grid(DEFAULT_RPN_WINDOW, DEFAULT_RPN_POINTS);
        let per_point: Vec<(Vec<f64>, MeasurementRecord)> = probe_detunings
            .par_iter()
            .map(|&det| -> Result<_> {
                let mut s = SimState::ground(&self.params);
                s.delta = delta;
                match pump {
                    None => self.step(&mut s, &Seg::PhononDrive { amplitude: probe_amplitude, phase: 0.0, duration: probe_duration, detuning: det })?,
                    Some(pump) => self.pumped_probe(&mut s, det, probe_duration, probe_amplitude, pump)?,
                }
                let p = self.rpn_trace(&s, &rpn_times)?;
                let rec = MeasurementRecord { sequence_id: format!("spectroscopy/probe={det:e}"), delta, times: rpn_times.clone(), p_excited: p };
                Ok((s.phonon_populations(), rec))
            })
            .collect::<Result<_>>()?;
        let mut r = ExperimentResult::new("spectroscopy");
        r.insert("delta_rad_s", delta);
        r.insert("probe_detunings_rad_s", probe_detunings);
        r.insert("probe_duration_s", probe_duration);
        r.insert("probe_amplitude_rad_s", probe_amplitude);
        r.insert("pump", pump);
        let pops: Vec<Vec<f64>> = per_point.iter().map(|(p, _)| p.clone()).collect();
        r.insert("mean_phonon", pops.iter().map(|p| p.iter().enumerate().map(|(n, x)| n as f64 * x).sum::<f64>()).collect::<Vec<_>>());
        r.insert("phonon_populations", pops);
        r.records = per_point.into_iter().map(|(_, rec)| rec).collect();
        Ok(r)
    }

    fn pumped_probe(&self, s: &mut SimState, det: f64, duration: f64, amplitude: f64, pump: PumpTone) -> Result<()> {
        let (shift, gain) = self.dressed_drive_calibration(s.delta)?;
        let sign_phase = if gain < 0.0 { PI } else { 0.0 };
        let tone = |amp: f64, offset: f64| DriveTerm {
            amplitude: amp / gain.abs(),
            frequency: shift + offset,
            phase: sign_phase + (shift + offset) * s.t,
            envelope: Envelope::Rectangular,
            start: 0.0,
            duration,
        };
        let model = self.model(s.delta)?.with_drive(tone(pump.amplitude, pump.detuning))?.with_drive(tone(amplitude, det))?;
        let out = dynamics::evolve_with(&model, &s.state(), &[duration], &self.integrator)?;
        s.rho = out[0].density_matrix();
        s.t += duration;
        Ok(())
    }

    /// Phonon state after a direct π/2 (or π) pulse, expressed in the frame of
    /// the dressed `|g0'⟩ → |g1'⟩` transition.
    pub fn prepare_cardinal_state(&self, point: CardinalPoint) -> Result<QuantumState> {
        let delta = self.params.delta;
        let (shift, _) = self.dressed_drive_calibration(delta)?;
        let s = self.run(&point.preparation(DEFAULT_PHONON_RABI))?;
        Ok(s.phonon_state_in_frame(shift))
    }
}

fn readout_name(r: PhononReadout) -> &'static str {
    match r {
        PhononReadout::Swap => "swap",
        PhononReadout::MeanNumber => "mean_number",
    }
}
