//! Prepares the six phonon cardinal states, samples their Wigner functions,
//! reconstructs each by maximum likelihood and reports Uhlmann fidelities.

use mechq::estimation::{default_wigner_grid, fidelity_squared, mle_reconstruct, wigner};
use mechq::sequences::{CardinalPoint, Simulator};
use mechq::{Dims, DeviceParams, QuantumState};
use nalgebra::DMatrix;
use rayon::prelude::*;

fn main() -> mechq::Result<()> {
    let params = DeviceParams::default();
    let sim = Simulator::new(params);
    let grid = default_wigner_grid();
    let rows: Vec<_> = CardinalPoint::ALL
        .par_iter()
        .map(|&point| -> mechq::Result<_> {
            let state = sim.prepare_cardinal_state(point)?;
            let w = wigner(&state, &grid)?;
            let samples: Vec<_> = grid.iter().copied().zip(w.iter().copied()).collect();
            let rho = pad(&mle_reconstruct(&samples, 4)?, params.dim_fock)?;
            let target = point.target(params.dim_fock);
            Ok((point, w[grid.len() / 2], fidelity_squared(&target, &state)?, fidelity_squared(&state, &rho)?))
        })
        .collect::<mechq::Result<_>>()?;
    println!("{:>8} {:>9} {:>11} {:>11}", "state", "W(0)", "F2 target", "F2 MLE");
    for (point, w0, f_target, f_mle) in rows {
        println!("{:>8} {:>9.4} {:>11.4} {:>11.5}", point.name(), w0, f_target, f_mle);
    }
    Ok(())
}

/// Zero-pads a phonon density matrix to `dim` levels.
fn pad(rho: &QuantumState, dim: usize) -> mechq::Result<QuantumState> {
    let small = rho.density_matrix();
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), small.shape()).copy_from(&small);
    QuantumState::density(Dims::fock(dim), m)
}
