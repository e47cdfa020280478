//! Analysis of measurement records: phonon-number inversion, curve fits,
//! Wigner functions, state reconstruction and fidelities.

mod fit;
mod tomography;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::hilbert::QuantumState;
use crate::sequences::{MeasurementRecord, Simulator};

pub use fit::{
    fit_damped_cosine, fit_decaying_cosine, fit_exponential, fit_lorentzian, fit_ramsey_anharmonicity, ramsey_model, FitParameter,
    FitResult, RAMSEY_LEAKAGE,
};
pub use tomography::{
    default_wigner_grid, fidelity, fidelity_squared, mle_reconstruct, mle_reconstruct_with, wigner, wigner_grid, wigner_integral,
    wigner_kernel, MleOptions, TRUNCATION_WARNING,
};

/// Tolerance on `Σ Pₙ = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;
/// Largest accepted condition number of an RPN basis.
pub const MAX_BASIS_CONDITION: f64 = 1e8;

/// Phonon-number populations `P₀ … P_{n_max}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockDistribution {
    populations: Vec<f64>,
}

impl FockDistribution {
    pub fn new(populations: Vec<f64>) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::InvalidDimension("empty Fock distribution".into()));
        }
        if let Some(p) = populations.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::ContractViolation(format!("population {p} outside [0, 1]")));
        }
        let sum: f64 = populations.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::ContractViolation(format!("populations sum to {sum}")));
        }
        Ok(Self { populations })
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn n_max(&self) -> usize {
        self.populations.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.populations.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// `½ Σ |Pₙ − Qₙ|`, padding the shorter vector with zeros.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        let len = self.populations.len().max(other.len());
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        0.5 * (0..len).map(|i| (at(&self.populations, i) - at(other, i)).abs()).sum::<f64>()
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `min ‖b − A x‖²` over the probability simplex: accelerated projected
/// gradient, then an exact equality-constrained solve on the support.
pub fn simplex_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<f64>> {
    let n = a.ncols();
    if n == 0 || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let lipschitz = ata.symmetric_eigenvalues().max().max(f64::MIN_POSITIVE);
    let objective = |x: &[f64]| (b - a * DVector::from_column_slice(x)).norm_squared();
    let grad = |x: &DVector<f64>| &ata * x - &atb;

    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    for _ in 0..50_000 {
        let step = &y - grad(&y) / lipschitz;
        let next = DVector::from_vec(project_simplex(step.as_slice()));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        let moved = (&next - &x).amax();
        x = next;
        t = t_next;
        if moved < 1e-15 {
            break;
        }
    }
    let mut best = x.as_slice().to_vec();
    if let Some(polished) = active_set_polish(&ata, &atb, &best) {
        if objective(&polished) <= objective(&best) {
            best = polished;
        }
    }
    Ok(best)
}

/// KKT solve restricted to the current support; `None` if it leaves the simplex.
fn active_set_polish(ata: &DMatrix<f64>, atb: &DVector<f64>, x: &[f64]) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 1e-12).collect();
    let k = support.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            kkt[(r, c)] = 2.0 * ata[(i, j)];
        }
        kkt[(r, k)] = 1.0;
        kkt[(k, r)] = 1.0;
        rhs[r] = 2.0 * atb[i];
    }
    rhs[k] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().take(k).any(|v| !(*v >= 0.0)) {
        return None;
    }
    let mut out = vec![0.0; x.len()];
    for (r, &i) in support.iter().enumerate() {
        out[i] = sol[r];
    }
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct BasisKey {
    rates: [u64; 7],
    dim_fock: usize,
    grid: [u64; 2],
    len: usize,
    n_max: usize,
}

impl BasisKey {
    fn new(p: &DeviceParams, times: &[f64], n_max: usize) -> Self {
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Self {
            rates: [p.g, p.t1_q, p.t2_q_ramsey, p.t1_p, p.t2_p, p.omega_p, p.omega_q].map(f64::to_bits),
            dim_fock: p.dim_fock,
            grid: [times.first().copied().unwrap_or(0.0).to_bits(), dt.to_bits()],
            len: times.len(),
            n_max,
        }
    }
}

type BasisCache = Mutex<HashMap<BasisKey, Arc<DMatrix<f64>>>>;

fn basis_cache() -> &'static BasisCache {
    static CACHE: OnceLock<BasisCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Columns are the RPN traces of `|0⟩ … |n_max⟩` on `times`, simulated
/// with the rates in `params`. Cached per rates and grid.
pub fn rpn_basis(params: &DeviceParams, times: &[f64], n_max: usize) -> Result<Arc<DMatrix<f64>>> {
    if n_max + 2 > params.dim_fock {
        return Err(Error::ContractViolation(format!("n_max = {n_max} needs dim_fock ≥ {}, got {}", n_max + 2, params.dim_fock)));
    }
    let key = BasisKey::new(params, times, n_max);
    if let Some(b) = basis_cache().lock().expect("basis cache poisoned").get(&key) {
        return Ok(b.clone());
    }
    let sim = Simulator::new(*params);
    let columns: Vec<Vec<f64>> = (0..=n_max)
        .into_par_iter()
        .map(|n| sim.rpn_trace_for_phonon(&QuantumState::fock(params.dim_fock, n), times))
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(times.len(), n_max + 1);
    for (j, col) in columns.iter().enumerate() {
        m.column_mut(j).copy_from_slice(col);
    }
    let m = Arc::new(m);
    basis_cache().lock().expect("basis cache poisoned").insert(key, m.clone());
    Ok(m)
}

/// Ratio of extreme singular values; infinite for rank-deficient input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 { f64::INFINITY } else { max / min }
}

/// Phonon populations that best reproduce an RPN record.
pub fn rpn_fit(record: &MeasurementRecord, basis_params: &DeviceParams, n_max: usize) -> Result<FockDistribution> {
    if !record.is_uniform() {
        return Err(Error::ContractViolation("RPN record must be on a uniform time grid".into()));
    }
    if record.len() < n_max + 1 {
        return Err(Error::UnderDetermined { samples: record.len(), unknowns: n_max + 1 });
    }
    let basis = rpn_basis(basis_params, &record.times, n_max)?;
    let condition = condition_number(&basis);
    if !(condition <= MAX_BASIS_CONDITION) {
        return Err(Error::IllConditionedBasis { condition });
    }
    let b = DVector::from_column_slice(&record.p_excited);
    let p = simplex_least_squares(&basis, &b)?;
    FockDistribution::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn simplex_solver_recovers_exact_mixture() {
        let a = DMatrix::from_fn(30, 4, |i, j| ((i as f64 + 1.0) * 0.3 * (j as f64 + 1.0)).sin());
        let truth = DVector::from_vec(vec![0.1, 0.0, 0.6, 0.3]);
        let x = simplex_least_squares(&a, &(&a * &truth)).unwrap();
        for (x, t) in x.iter().zip(truth.iter()) {
            assert_abs_diff_eq!(x, t, epsilon = 1e-9);
        }
    }

    #[test]
    fn simplex_solver_clips_infeasible_target() {
        let a = DMatrix::<f64>::identity(3, 3);
        let x = simplex_least_squares(&a, &DVector::from_vec(vec![-1.0, 0.2, 0.4])).unwrap();
        assert_abs_diff_eq!(x[0], 0.0);
        assert_abs_diff_eq!(x[1], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(x[2], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(FockDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(FockDistribution::new(vec![1.2, -0.2]).is_err());
        let d = FockDistribution::new(vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(d.mean(), 0.75);
        assert_abs_diff_eq!(d.total_variation(&[0.25, 0.5, 0.25]), 0.25);
    }

    #[test]
    fn basis_column_reproduces_level() {
        let params = DeviceParams { dim_fock: 5, ..DeviceParams::default() };
        let times = crate::sequences::uniform_grid(6e-6, 61);
        let basis = rpn_basis(&params, &times, 3).unwrap();
        let record = MeasurementRecord { sequence_id: "b1".into(), delta: 0.0, times, p_excited: basis.column(1).iter().copied().collect() };
        let d = rpn_fit(&record, &params, 3).unwrap();
        assert_abs_diff_eq!(d.populations()[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_basis_is_rejected() {
        let params = DeviceParams { dim_fock: 5, ..DeviceParams::default() };
        let times = vec![0.0, 1e-9, 2e-9, 3e-9];
        let record = MeasurementRecord { sequence_id: "short".into(), delta: 0.0, times, p_excited: vec![1.0; 4] };
        assert!(matches!(rpn_fit(&record, &params, 3), Err(Error::IllConditionedBasis { .. })));
    }

    #[test]
    fn truncation_limit_enforced() {
        let params = DeviceParams { dim_fock: 4, ..DeviceParams::default() };
        assert!(rpn_basis(&params, &[0.0, 1e-6], 3).is_err());
    }
}
