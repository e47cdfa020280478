//! Weak-probe spectroscopy of the dressed phonon. Without a pump only the
//! `0 → 1` line responds; a pump holding population in `|g1'⟩` opens the
//! `1 → 2` line, offset by the anharmonicity. A short Fock ladder keeps the
//! run quick.

use std::f64::consts::TAU;

use mechq::device;
use mechq::estimation::fit_lorentzian;
use mechq::sequences::{PumpTone, Simulator};
use mechq::DeviceParams;

fn main() -> mechq::Result<()> {
    let params = DeviceParams { dim_fock: 5, ..DeviceParams::default() };
    let sim = Simulator::new(params);
    let delta = params.delta;
    let alpha = device::anharmonicity(delta, params.g)?;

    let probes: Vec<f64> = (0..41).map(|k| TAU * 1e3 * (-40.0 + 2.0 * k as f64)).collect();
    let result = sim.run_spectroscopy(delta, &probes, 60e-6, TAU * 2e3, None)?;
    let means: Vec<f64> = serde_json::from_value(result.metadata["mean_phonon"].clone())?;
    let pts: Vec<(f64, f64)> = probes.iter().map(|p| p / TAU).zip(means).collect();
    let fit = fit_lorentzian(&pts)?;
    println!("0->1 line: centre {:.2} kHz, FWHM {:.2} kHz", fit.value("delta0")? / 1e3, fit.value("fwhm")? / 1e3);

    // Second-excited population at the 1->2 frequency and its mirror image.
    let pump = PumpTone { amplitude: TAU * 5e3, detuning: 0.0 };
    for (label, p) in [("no pump", None), ("pumped", Some(pump))] {
        let r = sim.run_spectroscopy(delta, &[alpha, -alpha], 60e-6, TAU * 2e3, p)?;
        let pops: Vec<Vec<f64>> = serde_json::from_value(r.metadata["phonon_populations"].clone())?;
        println!("{label:>8}: P2 at {:+.2} kHz = {:.4}, at {:+.2} kHz = {:.4}", alpha / TAU / 1e3, pops[0][2], -alpha / TAU / 1e3, pops[1][2]);
    }
    Ok(())
}
