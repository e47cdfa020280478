//! Nonlinear least-squares fits of measurement records.
//!
//! Every model is fitted in time (or detuning) units normalized by the span of
//! the data, so all parameters seen by the solver are of order one.

use std::f64::consts::{PI, TAU};

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::MeasurementRecord;

/// `1 − 2cos⁴(π/(2√2))`: weight of the population left in `|1⟩` by an
/// imperfect `n = 1` exchange during the Ramsey readout.
pub const RAMSEY_LEAKAGE: f64 = 0.922_263_702_589_167_2;

const MIN_POINTS: usize = 8;
/// Smallest peak-to-median ratio of the spectrum accepted as a real tone.
const MIN_PEAK_SIGNIFICANCE: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub unit: String,
    /// One standard deviation from the least-squares covariance.
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub parameters: Vec<FitParameter>,
    pub residual_rss: f64,
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn value(&self, name: &str) -> Result<f64> {
        self.get(name).ok_or_else(|| Error::ContractViolation(format!("fit has no parameter '{name}'")))
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).and_then(|p| p.std_error)
    }

    /// Builds the result from solver output in normalized units; `scales[j]`
    /// converts parameter `j` back to physical units.
    fn from_solution(model: &str, names: &[(&str, &str)], sol: &Solution, scales: &[f64]) -> Self {
        let covariance = sol.covariance.as_ref().map(|c| {
            (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)] * scales[i] * scales[j]).collect()).collect::<Vec<Vec<f64>>>()
        });
        let parameters = names
            .iter()
            .enumerate()
            .map(|(j, (name, unit))| FitParameter {
                name: name.to_string(),
                value: sol.params[j] * scales[j],
                unit: unit.to_string(),
                std_error: covariance.as_ref().map(|c| c[j][j].max(0.0).sqrt()),
            })
            .collect();
        Self { model: model.to_string(), parameters, residual_rss: sol.rss, covariance }
    }
}

struct CurveProblem<'a, M: Fn(&[f64], f64) -> f64> {
    model: &'a M,
    xs: &'a [f64],
    ys: &'a [f64],
    params: DVector<f64>,
}

impl<M: Fn(&[f64], f64) -> f64> CurveProblem<'_, M> {
    fn eval(&self, p: &[f64]) -> Option<DVector<f64>> {
        let r = DVector::from_iterator(self.xs.len(), self.xs.iter().zip(self.ys).map(|(&x, &y)| (self.model)(p, x) - y));
        r.iter().all(|v| v.is_finite()).then_some(r)
    }
}

impl<M: Fn(&[f64], f64) -> f64> LeastSquaresProblem<f64, Dyn, Dyn> for CurveProblem<'_, M> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.params.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.params.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.eval(self.params.as_slice())
    }

    /// Central differences.
    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let n = self.params.len();
        let mut jac = DMatrix::zeros(self.xs.len(), n);
        let mut p = self.params.as_slice().to_vec();
        for j in 0..n {
            let h = 1e-6 * p[j].abs().max(1.0);
            let orig = p[j];
            p[j] = orig + h;
            let plus = self.eval(&p)?;
            p[j] = orig - h;
            let minus = self.eval(&p)?;
            p[j] = orig;
            jac.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        Some(jac)
    }
}

struct Solution {
    params: Vec<f64>,
    rss: f64,
    covariance: Option<DMatrix<f64>>,
}

fn solve<M: Fn(&[f64], f64) -> f64>(model: &M, xs: &[f64], ys: &[f64], p0: &[f64]) -> Result<Solution> {
    let problem = CurveProblem { model, xs, ys, params: DVector::from_column_slice(p0) };
    let (problem, report) = LevenbergMarquardt::new().with_patience(400).minimize(problem);
    let r = problem.residuals();
    let rss = r.as_ref().map_or(f64::INFINITY, |r| r.norm_squared());
    if !report.termination.was_successful() || !rss.is_finite() {
        return Err(Error::FitFailure { iterations: report.number_of_evaluations, rss });
    }
    let (m, n) = (xs.len(), p0.len());
    let covariance = problem.jacobian().and_then(|j| (j.transpose() * &j).try_inverse()).filter(|_| m > n).map(|c| c * (rss / (m - n) as f64));
    Ok(Solution { params: problem.params.as_slice().to_vec(), rss, covariance })
}

/// Lowest-RSS solution over several starting points.
fn solve_multistart<M: Fn(&[f64], f64) -> f64>(model: &M, xs: &[f64], ys: &[f64], starts: &[Vec<f64>]) -> Result<Solution> {
    let mut best: Option<Solution> = None;
    let mut first_err = None;
    for p0 in starts {
        match solve(model, xs, ys, p0) {
            Ok(s) if best.as_ref().is_none_or(|b| s.rss < b.rss) => best = Some(s),
            Ok(_) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::FitInitialization("no starting point".into())))
}

fn require_points(n: usize, unknowns: usize) -> Result<()> {
    if n < MIN_POINTS.max(unknowns) {
        return Err(Error::UnderDetermined { samples: n, unknowns: MIN_POINTS.max(unknowns) });
    }
    Ok(())
}

/// Times divided by their span, and the span.
fn normalize_times(times: &[f64]) -> Result<(Vec<f64>, f64)> {
    let span = times.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    if !(span > 0.0) {
        return Err(Error::ContractViolation("time axis has zero span".into()));
    }
    Ok((times.iter().map(|t| t / span).collect(), span))
}

/// Dominant nonzero angular frequency of `ys` sampled at spacing `dt`, with
/// the ratio of the peak to the median spectral magnitude.
fn spectral_peak(ys: &[f64], dt: f64) -> Option<(f64, f64)> {
    let n = ys.len();
    if n < 4 || !(dt > 0.0) {
        return None;
    }
    let pad = 8;
    let len = (n * pad).next_power_of_two();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = ys.iter().map(|y| C64::new(y - mean, 0.0)).collect();
    buf.resize(len, C64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mags: Vec<f64> = buf[..len / 2 + 1].iter().map(|c| c.norm()).collect();
    // Below one cycle per record the tone cannot be told from a drift.
    let lowest = (len as f64 / n as f64).ceil() as usize;
    let (k, peak) = mags.iter().enumerate().skip(lowest).fold((0, 0.0), |acc, (k, &m)| if m > acc.1 { (k, m) } else { acc });
    if k == 0 {
        return None;
    }
    let mut sorted = mags[lowest..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2].max(f64::MIN_POSITIVE);
    Some((TAU * k as f64 / (len as f64 * dt), peak / median))
}

fn mean_spacing(times: &[f64]) -> f64 {
    (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
}

const PHASE_STARTS: [f64; 4] = [0.0, 0.5 * PI, PI, 1.5 * PI];

/// `A(1 − e^{−κt} cos(ωt + φ))`.
pub fn fit_damped_cosine(record: &MeasurementRecord) -> Result<FitResult> {
    require_points(record.len(), 4)?;
    let (xs, span) = normalize_times(&record.times)?;
    let ys = &record.p_excited;
    let a0 = ys.iter().sum::<f64>() / ys.len() as f64;
    let w0 = spectral_peak(ys, mean_spacing(&record.times)).map_or(PI, |(w, _)| w * span);
    let model = |p: &[f64], t: f64| p[0] * (1.0 - (-p[1] * t).exp() * (p[2] * t + p[3]).cos());
    let starts: Vec<Vec<f64>> =
        [0.1, 1.0].iter().flat_map(|&k| PHASE_STARTS.iter().map(move |&ph| vec![a0, k, w0, ph])).collect();
    let sol = solve_multistart(&model, &xs, ys, &starts)?;
    let mut r = FitResult::from_solution(
        "damped_cosine",
        &[("A", "1"), ("kappa", "1/s"), ("omega", "rad/s"), ("phi", "rad")],
        &sol,
        &[1.0, 1.0 / span, 1.0 / span, 1.0],
    );
    canonicalize_oscillation(&mut r, "omega", "phi");
    Ok(r)
}

/// `c + A e^{−t/T2} cos(ωt + φ)`, the free-offset Ramsey fringe.
pub fn fit_decaying_cosine(record: &MeasurementRecord) -> Result<FitResult> {
    require_points(record.len(), 5)?;
    let (xs, span) = normalize_times(&record.times)?;
    let ys = &record.p_excited;
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let c0 = ys.iter().sum::<f64>() / ys.len() as f64;
    let w0 = spectral_peak(ys, mean_spacing(&record.times)).map_or(PI, |(w, _)| w * span);
    // Rate parameterization keeps the solver away from the T2 → 0 pole.
    let model = |p: &[f64], t: f64| p[0] + p[1] * (-p[2] * t).exp() * (p[3] * t + p[4]).cos();
    let starts: Vec<Vec<f64>> = [0.5, 2.0]
        .iter()
        .flat_map(|&k| PHASE_STARTS.iter().map(move |&ph| vec![c0, 0.5 * (hi - lo), k, w0, ph]))
        .collect();
    let sol = solve_multistart(&model, &xs, ys, &starts)?;
    let mut r = FitResult::from_solution(
        "decaying_cosine",
        &[("c", "1"), ("A", "1"), ("gamma", "1/s"), ("omega", "rad/s"), ("phi", "rad")],
        &sol,
        &[1.0, 1.0, 1.0 / span, 1.0 / span, 1.0],
    );
    push_time_constant(&mut r, "gamma", "T2");
    canonicalize_oscillation(&mut r, "omega", "phi");
    Ok(r)
}

/// `A e^{−t/T1} + c`.
pub fn fit_exponential(record: &MeasurementRecord) -> Result<FitResult> {
    require_points(record.len(), 3)?;
    let (xs, span) = normalize_times(&record.times)?;
    let ys = &record.p_excited;
    let c0 = ys[ys.len() - 1];
    let a0 = ys[0] - c0;
    let model = |p: &[f64], t: f64| p[0] * (-p[1] * t).exp() + p[2];
    let starts: Vec<Vec<f64>> = [0.3, 1.0, 3.0].iter().map(|&k| vec![a0, k, c0]).collect();
    let sol = solve_multistart(&model, &xs, ys, &starts)?;
    let mut r =
        FitResult::from_solution("exponential", &[("A", "1"), ("gamma", "1/s"), ("c", "1")], &sol, &[1.0, 1.0 / span, 1.0]);
    push_time_constant(&mut r, "gamma", "T1");
    Ok(r)
}

/// `A (Γ/2)² / ((δ − δ0)² + (Γ/2)²) + c` over `(detuning, value)` points.
pub fn fit_lorentzian(points: &[(f64, f64)]) -> Result<FitResult> {
    require_points(points.len(), 4)?;
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    if !(half > 0.0) {
        return Err(Error::ContractViolation("detuning axis has zero span".into()));
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| (x - center) / half).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let c0 = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let (imax, ymax) = ys.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, y)| if y > a.1 { (i, y) } else { a });
    let above = ys.iter().filter(|&&y| y - c0 > 0.5 * (ymax - c0)).count();
    let width0 = (2.0 * above as f64 / ys.len() as f64).max(4.0 / ys.len() as f64);
    let model = |p: &[f64], x: f64| {
        let hw = 0.5 * p[2];
        p[0] * hw * hw / ((x - p[1]).powi(2) + hw * hw) + p[3]
    };
    let starts: Vec<Vec<f64>> = [0.5, 1.0, 2.0].iter().map(|&s| vec![ymax - c0, xs[imax], s * width0, c0]).collect();
    let sol = solve_multistart(&model, &xs, &ys, &starts)?;
    let mut r = FitResult::from_solution(
        "lorentzian",
        &[("A", "1"), ("delta0", "rad/s"), ("fwhm", "rad/s"), ("c", "1")],
        &sol,
        &[1.0, half, half, 1.0],
    );
    for p in &mut r.parameters {
        match p.name.as_str() {
            "delta0" => p.value += center,
            "fwhm" => p.value = p.value.abs(),
            _ => {}
        }
    }
    Ok(r)
}

/// Ramsey fringe of the `(|0⟩+|2⟩)/√2` interferometer.
pub fn ramsey_model(alpha: f64, gamma1: f64, gamma_phi: f64, omega_ad: f64, t: f64) -> f64 {
    0.5 * (1.0
        + RAMSEY_LEAKAGE * ((-2.0 * gamma1 * t).exp() - (-gamma1 * t).exp())
        + (-(gamma1 + 4.0 * gamma_phi) * t).exp() * ((alpha + 2.0 * omega_ad) * t).cos())
}

/// Fits `α` and `γφ` of [`ramsey_model`] with `γ1` and `ω_AD` held fixed.
///
/// The fringe only fixes `|α + 2ω_AD|`; the branch with `α + 2ω_AD` of the
/// sign of `ω_AD` is taken, so `|α| < 2|ω_AD|` is assumed, and with `ω_AD = 0`
/// the positive root is returned.
pub fn fit_ramsey_anharmonicity(record: &MeasurementRecord, gamma1: f64, omega_ad: f64) -> Result<FitResult> {
    if record.len() < 4 {
        return Err(Error::UnderDetermined { samples: record.len(), unknowns: 4 });
    }
    if !record.is_uniform() {
        return Err(Error::ContractViolation("Ramsey record must be on a uniform time grid".into()));
    }
    let dt = mean_spacing(&record.times);
    let nyquist = PI / dt;
    if 2.0 * omega_ad.abs() >= nyquist {
        return Err(Error::FitInitialization(format!("2ω_AD = {:e} rad/s is above the Nyquist limit {nyquist:e} rad/s", 2.0 * omega_ad)));
    }
    let (peak, significance) = spectral_peak(&record.p_excited, dt)
        .ok_or_else(|| Error::FitInitialization("no oscillation resolvable on the time grid".into()))?;
    if significance < MIN_PEAK_SIGNIFICANCE {
        return Err(Error::FitInitialization(format!("spectral peak only {significance:.2}× the median")));
    }
    let (xs, span) = normalize_times(&record.times)?;
    let (g1, ad) = (gamma1 * span, omega_ad * span);
    let model = |p: &[f64], t: f64| ramsey_model(p[0], g1, p[1], ad, t);
    let w = if omega_ad < 0.0 { -peak } else { peak };
    let starts: Vec<Vec<f64>> = [0.05, 0.5].iter().map(|&gp| vec![w * span - 2.0 * ad, gp]).collect();
    let sol = solve_multistart(&model, &xs, &record.p_excited, &starts)?;
    Ok(FitResult::from_solution("ramsey_anharmonicity", &[("alpha", "rad/s"), ("gamma_phi", "1/s")], &sol, &[1.0 / span, 1.0 / span]))
}

/// Appends `1/rate` as a time constant with propagated uncertainty.
fn push_time_constant(r: &mut FitResult, rate: &str, name: &str) {
    let Some(p) = r.parameters.iter().find(|p| p.name == rate).cloned() else { return };
    r.parameters.push(FitParameter {
        name: name.to_string(),
        value: 1.0 / p.value,
        unit: "s".into(),
        std_error: p.std_error.map(|s| s / (p.value * p.value)),
    });
}

/// Maps `(ω, φ)` to `ω ≥ 0`, `φ ∈ (−π, π]`, which describe the same curve.
fn canonicalize_oscillation(r: &mut FitResult, omega: &str, phi: &str) {
    let w = r.get(omega).unwrap_or(0.0);
    for p in &mut r.parameters {
        if p.name == omega {
            p.value = w.abs();
        } else if p.name == phi {
            let v = if w < 0.0 { -p.value } else { p.value };
            p.value = v - TAU * ((v + PI) / TAU).ceil() + TAU;
        }
    }
}
