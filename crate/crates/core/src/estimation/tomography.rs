//! Wigner functions, maximum-likelihood reconstruction and state fidelity.

use std::f64::consts::FRAC_2_PI;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::BFGS;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{self, Dims, Operator, QuantumState};

/// Population in the top two Fock levels above which a Wigner function is
/// flagged as truncation-limited.
pub const TRUNCATION_WARNING: f64 = 1e-4;

/// Square grid of `n × n` points over `[−extent, extent]²`, real part fastest.
pub fn wigner_grid(n: usize, extent: f64) -> Vec<C64> {
    let axis: Vec<f64> = match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| -extent + 2.0 * extent * k as f64 / (n - 1) as f64).collect(),
    };
    axis.iter().flat_map(|&im| axis.iter().map(move |&re| C64::new(re, im))).collect()
}

/// 41 × 41 points over `[−2.5, 2.5]²`.
pub fn default_wigner_grid() -> Vec<C64> {
    wigner_grid(41, 2.5)
}

/// Generalized Laguerre polynomials `L_m^{(k)}(x)` for `m = 0 … m_max`.
fn laguerre(m_max: usize, k: usize, x: f64) -> Vec<f64> {
    let k = k as f64;
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(1.0);
    if m_max >= 1 {
        out.push(1.0 + k - x);
    }
    for j in 1..m_max {
        let jf = j as f64;
        out.push(((2.0 * jf + 1.0 + k - x) * out[j] - (jf + k) * out[j - 1]) / (jf + 1.0));
    }
    out
}

/// Upper-triangular `K` with `W(β) = Re Σ_{m≤n} ρ_{mn} K_{mn}` for the
/// displaced-parity Wigner function `(2/π) Tr[D(−β) ρ D(β) Π]`.
pub fn wigner_kernel(beta: C64, dim: usize) -> DMatrix<C64> {
    let x = 4.0 * beta.norm_sqr();
    let pref = FRAC_2_PI * (-0.5 * x).exp();
    let two_beta = 2.0 * beta;
    let mut k = DMatrix::zeros(dim, dim);
    for offset in 0..dim {
        let lag = laguerre(dim - 1 - offset, offset, x);
        let power = two_beta.powu(offset as u32);
        let weight = if offset == 0 { 1.0 } else { 2.0 };
        for m in 0..dim - offset {
            let n = m + offset;
            // √(m!/n!)
            let ratio: f64 = ((m + 1)..=n).map(|j| (j as f64).sqrt().recip()).product();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            k[(m, n)] = power * (weight * pref * sign * ratio * lag[m]);
        }
    }
    k
}

fn kernel_dot(k: &DMatrix<C64>, rho: &DMatrix<C64>) -> f64 {
    let d = k.nrows();
    let mut w = 0.0;
    for n in 0..d {
        for m in 0..=n {
            w += (rho[(m, n)] * k[(m, n)]).re;
        }
    }
    w
}

fn phonon_density(rho: &QuantumState) -> Result<DMatrix<C64>> {
    if rho.dims().qubit != 1 {
        return Err(Error::ContractViolation("Wigner function needs a phonon-only state; trace out the qubit first".into()));
    }
    Ok(rho.density_matrix())
}

/// Wigner function of a phonon state at each point of `grid`.
pub fn wigner(rho: &QuantumState, grid: &[C64]) -> Result<Vec<f64>> {
    let m = phonon_density(rho)?;
    let d = m.nrows();
    if let Some(beta) = grid.iter().find(|b| !(b.re.is_finite() && b.im.is_finite())) {
        return Err(Error::ContractViolation(format!("non-finite grid point {beta}")));
    }
    let top: f64 = (d.saturating_sub(2)..d).map(|n| m[(n, n)].re).sum();
    if d > 2 && top > TRUNCATION_WARNING {
        log::warn!("population {top:.2e} in the top two Fock levels; Wigner function may be truncation-limited");
    }
    Ok(grid.par_iter().map(|&b| kernel_dot(&wigner_kernel(b, d), &m)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub max_iters: u64,
    /// Stop once the normalized negative log-likelihood changes by less than this.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iters: 500, tolerance: 1e-9 }
    }
}

/// Negative log-likelihood of Wigner samples with equal Gaussian errors,
/// normalized by `Σ w²`, over the Cholesky-like parameters of `ρ = T†T/Tr`.
struct WignerLikelihood {
    dim: usize,
    kernels: Vec<DMatrix<C64>>,
    values: Vec<f64>,
    norm: f64,
}

impl WignerLikelihood {
    fn cost_at(&self, x: &[f64]) -> f64 {
        let rho = rho_from_params(x, self.dim);
        let rss: f64 = self.kernels.iter().zip(&self.values).map(|(k, w)| (kernel_dot(k, &rho) - w).powi(2)).sum();
        0.5 * rss / self.norm
    }
}

impl CostFunction for WignerLikelihood {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.cost_at(x))
    }
}

impl Gradient for WignerLikelihood {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    /// Central differences.
    fn gradient(&self, x: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let mut p = x.clone();
        Ok((0..x.len())
            .map(|j| {
                let h = 1e-7 * x[j].abs().max(1e-3);
                p[j] = x[j] + h;
                let plus = self.cost_at(&p);
                p[j] = x[j] - h;
                let minus = self.cost_at(&p);
                p[j] = x[j];
                (plus - minus) / (2.0 * h)
            })
            .collect())
    }
}

/// Lower-triangular `T` from `d` real diagonal entries followed by the real
/// and imaginary parts of the strictly lower entries, row by row.
fn t_from_params(x: &[f64], d: usize) -> DMatrix<C64> {
    let mut t = DMatrix::zeros(d, d);
    let mut k = d;
    for i in 0..d {
        t[(i, i)] = C64::new(x[i], 0.0);
        for j in 0..i {
            t[(i, j)] = C64::new(x[k], x[k + 1]);
            k += 2;
        }
    }
    t
}

fn params_from_t(t: &DMatrix<C64>) -> Vec<f64> {
    let d = t.nrows();
    let mut x: Vec<f64> = (0..d).map(|i| t[(i, i)].re).collect();
    for i in 0..d {
        for j in 0..i {
            x.push(t[(i, j)].re);
            x.push(t[(i, j)].im);
        }
    }
    x
}

fn rho_from_params(x: &[f64], d: usize) -> DMatrix<C64> {
    let t = t_from_params(x, d);
    let rho = t.adjoint() * &t;
    let tr = rho.trace().re;
    rho / C64::new(tr, 0.0)
}

/// Lower-triangular `T` with `T†T = ρ` for positive definite `ρ`, via the
/// Cholesky factor of the index-reversed matrix.
fn t_from_rho(rho: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let d = rho.nrows();
    let rev = DMatrix::from_fn(d, d, |i, j| rho[(d - 1 - i, d - 1 - j)]);
    let l = rev.cholesky()?.l();
    let la = l.adjoint();
    Some(DMatrix::from_fn(d, d, |i, j| la[(d - 1 - i, d - 1 - j)]))
}

/// Unconstrained Hermitian least-squares estimate projected onto the
/// positive cone and mixed slightly with the identity.
fn linear_inversion(kernels: &[DMatrix<C64>], values: &[f64], d: usize) -> DMatrix<C64> {
    let mut design = DMatrix::zeros(kernels.len(), d * d);
    for (r, k) in kernels.iter().enumerate() {
        let mut c = 0;
        for m in 0..d {
            design[(r, c)] = k[(m, m)].re;
            c += 1;
        }
        for n in 0..d {
            for m in 0..n {
                design[(r, c)] = k[(m, n)].re;
                design[(r, c + 1)] = -k[(m, n)].im;
                c += 2;
            }
        }
    }
    let b = DVector::from_column_slice(values);
    let sol = design.svd(true, true).solve(&b, 1e-12).unwrap_or_else(|_| DVector::zeros(d * d));
    let mut rho = DMatrix::zeros(d, d);
    let mut c = 0;
    for m in 0..d {
        rho[(m, m)] = C64::new(sol[c], 0.0);
        c += 1;
    }
    for n in 0..d {
        for m in 0..n {
            rho[(m, n)] = C64::new(sol[c], sol[c + 1]);
            rho[(n, m)] = C64::new(sol[c], -sol[c + 1]);
            c += 2;
        }
    }
    let op = Operator::from_matrix(Dims::fock(d), rho).expect("square by construction");
    let clipped = hilbert::eigh_unchecked(&op).map(|l| C64::new(l.max(0.0), 0.0)).into_matrix();
    let tr = clipped.trace().re;
    let eps = 1e-6;
    let id = DMatrix::<C64>::identity(d, d) / C64::new(d as f64, 0.0);
    if tr > 0.0 { clipped / C64::new(tr / (1.0 - eps), 0.0) + id * C64::new(eps, 0.0) } else { id }
}

/// Density matrix on `n_max + 1` Fock levels maximizing the likelihood of
/// `(β, W(β))` samples.
pub fn mle_reconstruct(samples: &[(C64, f64)], n_max: usize) -> Result<QuantumState> {
    mle_reconstruct_with(samples, n_max, &MleOptions::default())
}

pub fn mle_reconstruct_with(samples: &[(C64, f64)], n_max: usize, options: &MleOptions) -> Result<QuantumState> {
    let d = n_max + 1;
    if samples.len() < d * d {
        return Err(Error::UnderDetermined { samples: samples.len(), unknowns: d * d });
    }
    let kernels: Vec<DMatrix<C64>> = samples.iter().map(|(b, _)| wigner_kernel(*b, d)).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let norm = values.iter().map(|w| w * w).sum::<f64>().max(f64::MIN_POSITIVE);
    let start = linear_inversion(&kernels, &values, d);
    let x0 = params_from_t(&t_from_rho(&start).expect("mixed with identity, hence positive definite"));
    let problem = WignerLikelihood { dim: d, kernels, values, norm };
    let initial_cost = problem.cost_at(&x0);

    let n = x0.len();
    let inv_hessian: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let solver = BFGS::new(MoreThuenteLineSearch::new())
        .with_tolerance_cost(options.tolerance)
        .and_then(|s| s.with_tolerance_grad(0.0))
        .map_err(|e| Error::ContractViolation(e.to_string()))?;
    let best = match Executor::new(problem, solver)
        .configure(|s| s.param(x0.clone()).inv_hessian(inv_hessian).max_iters(options.max_iters))
        .run()
    {
        Ok(res) if res.state().get_best_cost() <= initial_cost => res.state().get_best_param().cloned().unwrap_or(x0),
        Ok(_) => x0,
        Err(e) => {
            log::warn!("MLE optimizer stopped early ({e}); keeping the best feasible estimate");
            x0
        }
    };
    let mut rho = rho_from_params(&best, d);
    hilbert::hermitize(&mut rho);
    let tr = rho.trace().re;
    rho /= C64::new(tr, 0.0);
    QuantumState::density(Dims::fock(d), rho)
}

/// Uhlmann fidelity `Tr√(√ρ σ √ρ)`, the square-root convention.
///
/// Pure inputs use `√⟨ψ|σ|ψ⟩`; mixed pairs use the trace norm of `√ρ √σ`,
/// whose singular values are the square roots of the eigenvalues of
/// `√ρ σ √ρ` and which is symmetric by construction.
pub fn fidelity(rho: &QuantumState, sigma: &QuantumState) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return Err(Error::DimensionMismatch { expected: rho.dims().total(), found: sigma.dims().total() });
    }
    let pure = |psi: &DVector<C64>, other: &QuantumState| {
        let s = other.density_matrix();
        (psi.adjoint() * s * psi)[(0, 0)].re.max(0.0).sqrt()
    };
    let f = match (rho, sigma) {
        (QuantumState::Ket { amplitudes, .. }, other) | (other, QuantumState::Ket { amplitudes, .. }) => pure(amplitudes, other),
        _ => {
            let a = hilbert::sqrt_psd(&rho.as_operator());
            let b = hilbert::sqrt_psd(&sigma.as_operator());
            (a.matrix() * b.matrix()).singular_values().iter().sum()
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// `F²`, the overlap `⟨ψ|σ|ψ⟩` for a pure reference.
pub fn fidelity_squared(rho: &QuantumState, sigma: &QuantumState) -> Result<f64> {
    fidelity(rho, sigma).map(|f| f * f)
}

/// Riemann sum of `W` over a square grid from [`wigner_grid`].
pub fn wigner_integral(w: &[f64], n: usize, extent: f64) -> f64 {
    let h = 2.0 * extent / (n - 1) as f64;
    w.iter().sum::<f64>() * h * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn superposition(d: usize, phase: C64) -> QuantumState {
        let mut v = DVector::zeros(d);
        v[0] = C64::new(FRAC_1_SQRT_2, 0.0);
        v[1] = phase * FRAC_1_SQRT_2;
        QuantumState::ket(Dims::fock(d), v).unwrap()
    }

    #[test]
    fn vacuum_and_fock_one_at_origin() {
        let w0 = wigner(&QuantumState::fock(6, 0), &[C64::new(0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(w0[0], 2.0 / PI, epsilon = 1e-14);
        let w1 = wigner(&QuantumState::fock(6, 1), &[C64::new(0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(w1[0], -2.0 / PI, epsilon = 1e-14);
    }

    #[test]
    fn vacuum_is_gaussian() {
        let b = C64::new(0.7, -0.4);
        let w = wigner(&QuantumState::fock(4, 0), &[b]).unwrap();
        assert_abs_diff_eq!(w[0], 2.0 / PI * (-2.0 * b.norm_sqr()).exp(), epsilon = 1e-14);
    }

    #[test]
    fn coherence_shifts_toward_mean_amplitude() {
        // ⟨p⟩ = i/2 puts the positive lobe at Im β > 0.
        let s = superposition(4, C64::new(0.0, 1.0));
        let w = wigner(&s, &[C64::new(0.0, 0.5), C64::new(0.0, -0.5)]).unwrap();
        assert!(w[0] > w[1]);
    }

    #[test]
    fn fock_two_matches_laguerre() {
        let b = C64::new(0.3, 0.2);
        let x = 4.0 * b.norm_sqr();
        let w = wigner(&QuantumState::fock(5, 2), &[b]).unwrap();
        let l2 = 1.0 - 2.0 * x + 0.5 * x * x;
        assert_abs_diff_eq!(w[0], 2.0 / PI * (-0.5 * x).exp() * l2, epsilon = 1e-14);
    }

    #[test]
    fn qubit_state_rejected() {
        let s = QuantumState::basis(Dims::composite(3), hilbert::Qubit::Ground, 0);
        assert!(wigner(&s, &[C64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn fidelity_conventions() {
        let z = QuantumState::fock(3, 0);
        let o = QuantumState::fock(3, 1);
        assert_abs_diff_eq!(fidelity(&z, &z).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&z, &o).unwrap(), 0.0, epsilon = 1e-12);
        let p = superposition(3, C64::new(1.0, 0.0));
        assert_abs_diff_eq!(fidelity(&z, &p).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity_squared(&z.to_density(), &p.to_density()).unwrap(), 0.5, epsilon = 1e-7);
        assert!(fidelity(&z, &QuantumState::fock(4, 0)).is_err());
    }

    #[test]
    fn under_determined_reconstruction() {
        let samples = vec![(C64::new(0.0, 0.0), 0.5); 8];
        assert!(matches!(mle_reconstruct(&samples, 2), Err(Error::UnderDetermined { samples: 8, unknowns: 9 })));
    }

    #[test]
    fn reconstruction_round_trip() {
        let target = superposition(4, C64::new(0.0, 1.0));
        let grid = wigner_grid(11, 2.0);
        let w = wigner(&target, &grid).unwrap();
        let samples: Vec<(C64, f64)> = grid.into_iter().zip(w).collect();
        let rho = mle_reconstruct(&samples, 3).unwrap();
        assert!(fidelity(&target, &rho).unwrap() >= 0.999);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn t_parameterization_round_trip() {
        let rho = DMatrix::from_fn(3, 3, |i, j| if i == j { C64::new(1.0 + i as f64, 0.0) } else { C64::new(0.1, 0.05 * (i as f64 - j as f64)) });
        let t = t_from_rho(&rho).unwrap();
        assert!(hilbert::max_abs(&(t.adjoint() * &t - &rho)) < 1e-12);
        assert!(t[(0, 1)].norm() == 0.0);
        let back = rho_from_params(&params_from_t(&t), 3);
        assert!(hilbert::max_abs(&(back * rho.trace() - &rho)) < 1e-12);
    }
}
