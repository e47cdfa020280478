//! Lindblad evolution of a `(|0⟩+|2⟩)/√2` phonon under Kerr plus loss,
//! checked against the closed-form density matrix.

use std::f64::consts::TAU;

use mechq::dynamics::{analytic_kerr_evolution, evolve, kerr_model};
use mechq::sequences::uniform_grid;
use mechq::QuantumState;
use nalgebra::DVector;
use num_complex::Complex64 as C64;

fn main() -> mechq::Result<()> {
    let (alpha, gamma1, gamma_phi, dim) = (TAU * 17.3e3, 1.0 / 104e-6, 0.5 * (1.0 / 205e-6 - 0.5 / 104e-6), 5);
    let model = kerr_model(alpha, gamma1, gamma_phi, dim)?;
    let mut amps = DVector::zeros(dim);
    amps[0] = C64::new(1.0, 0.0);
    amps[2] = C64::new(1.0, 0.0);
    let rho0 = QuantumState::ket_normalized(model.dims(), amps)?;

    let times = uniform_grid(200e-6, 11);
    let states = evolve(&model, &rho0, &times)?;
    for (t, s) in times.iter().zip(&states) {
        let exact = analytic_kerr_evolution(alpha, gamma1, gamma_phi, *t, dim)?;
        let err = (s.density_matrix() - exact.density_matrix()).camax();
        let rho = s.density_matrix();
        println!("t = {:6.1} us  P2 = {:.4}  |rho02| = {:.4}  max error {:.2e}", t * 1e6, rho[(2, 2)].re, rho[(0, 2)].norm(), err);
    }
    Ok(())
}
