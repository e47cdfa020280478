use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{CollapseOp, LindbladModel};
use crate::error::{Error, Result};
use crate::hilbert::{self, Dims, QuantumState};

/// Phonon-only model `H = (α/2) p†p†pp` with decay `γ1` and dephasing `2γφ D[p†p]`.
pub fn kerr_model(alpha: f64, gamma1: f64, gamma_phi: f64, dim_fock: usize) -> Result<LindbladModel> {
    let p = hilbert::annihilation(dim_fock)?;
    let pd = p.adjoint();
    let h = &(&(&(&pd * &pd) * &p) * &p) * (0.5 * alpha);
    let num = hilbert::number(dim_fock)?;
    LindbladModel::new(
        h,
        vec![CollapseOp::new("phonon_decay", p, gamma1)?, CollapseOp::new("phonon_dephasing", num, 2.0 * gamma_phi)?],
    )
}

/// Closed-form state of `kerr_model` at time `t` from `(|0⟩+|2⟩)/√2`.
///
/// `ρ₀₂ = ½ e^{iαt − (γ1+4γφ)t}`: level 2 sits at energy `α`, so its amplitude
/// rotates as `e^{−iαt}` and the `⟨0|ρ|2⟩` element carries the conjugate phase.
pub fn analytic_kerr_evolution(alpha: f64, gamma1: f64, gamma_phi: f64, t: f64, dim_fock: usize) -> Result<QuantumState> {
    if dim_fock < 3 {
        return Err(Error::InvalidDimension(format!("need at least 3 Fock levels, got {dim_fock}")));
    }
    if t < 0.0 {
        return Err(Error::ContractViolation(format!("time must be non-negative, got {t}")));
    }
    let e1 = (-gamma1 * t).exp();
    let e2 = (-2.0 * gamma1 * t).exp();
    let a = 1.0 + 0.5 * e2 - e1;
    let c = e1 - e2;
    let e = 0.5 * e2;
    let b = C64::from_polar(0.5 * (-(gamma1 + 4.0 * gamma_phi) * t).exp(), alpha * t);
    let mut m = DMatrix::zeros(dim_fock, dim_fock);
    m[(0, 0)] = C64::new(a, 0.0);
    m[(1, 1)] = C64::new(c, 0.0);
    m[(2, 2)] = C64::new(e, 0.0);
    m[(0, 2)] = b;
    m[(2, 0)] = b.conj();
    Ok(QuantumState::density_unchecked(Dims::fock(dim_fock), m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    #[test]
    fn initial_state() {
        let s = analytic_kerr_evolution(1.0, 0.1, 0.1, 0.0, 4).unwrap();
        let m = s.density_matrix();
        for (i, j) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert_abs_diff_eq!(m[(i, j)].re, 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coherence_envelope() {
        let (g1, gp) = (1.0 / 104e-6, 70.0);
        let t = 1.0 / (g1 + 4.0 * gp);
        let s = analytic_kerr_evolution(TAU * -17.3e3, g1, gp, t, 3).unwrap();
        assert_abs_diff_eq!(s.density_matrix()[(0, 2)].norm(), 0.5 / std::f64::consts::E, epsilon = 1e-14);
        assert_abs_diff_eq!(s.trace(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lindblad_matches_closed_form() {
        let (alpha, g1, gp, n) = (TAU * -17.3e3, 1.0 / 104e-6, 1.0 / 205e-6 - 0.5 / 104e-6, 6);
        let model = kerr_model(alpha, g1, gp, n).unwrap();
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = nalgebra::DVector::zeros(n);
        v[0] = C64::new(s2, 0.0);
        v[2] = C64::new(s2, 0.0);
        let rho0 = QuantumState::ket(Dims::fock(n), v).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 10e-6).collect();
        let out = evolve(&model, &rho0, &grid).unwrap();
        for (t, s) in grid.iter().zip(&out) {
            let expect = analytic_kerr_evolution(alpha, g1, gp, *t, n).unwrap().density_matrix();
            assert!(hilbert::max_abs(&(s.density_matrix() - expect)) < 1e-6);
        }
    }
}
