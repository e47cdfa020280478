//! Dressed-phonon anharmonicity and inverse-Purcell budget across detuning.
//!
//! Run with `cargo run --example theory`.

use std::f64::consts::TAU;

use mechq::device::{self, DressedSpectrum};
use mechq::DeviceParams;

fn main() -> mechq::Result<()> {
    let params = DeviceParams::default();
    println!("{:>10} {:>12} {:>12} {:>10} {:>8}", "delta/MHz", "alpha/kHz", "dispersive", "p_p1", "a/G2");
    let deltas: Vec<f64> = [-4.0, -3.0, -2.0, -1.5, -1.0, -0.71, -0.5].iter().map(|d| TAU * d * 1e6).collect();
    for row in device::theory_table(&params, &deltas)? {
        let limit = device::anharmonicity_dispersive_limit(row.delta, params.g)?;
        println!(
            "{:>10.2} {:>12.4} {:>12.4} {:>10.4} {:>8.3}",
            row.delta / TAU / 1e6,
            row.alpha / TAU / 1e3,
            limit / TAU / 1e3,
            row.p_p1,
            row.alpha_over_gamma2
        );
    }

    // The closed form and a full diagonalization agree to rounding.
    let spectrum = DressedSpectrum::new(params.delta, params.g, params.dim_fock)?;
    let closed = device::anharmonicity(params.delta, params.g)?;
    println!("operating point: closed form {:.6} kHz, spectrum {:.6} kHz", closed / TAU / 1e3, spectrum.anharmonicity() / TAU / 1e3);
    for level in device::dressed_levels(params.delta, params.g, 3)? {
        println!("  |g{}'>  phonon weight {:.4}", level.n, level.phonon_weight);
    }
    Ok(())
}
