//! Closed-loop anharmonicity measurement: simulate the phonon Ramsey
//! sequence, then fit the fringe and compare with the dressed-state value.

use std::f64::consts::TAU;

use mechq::device;
use mechq::estimation::fit_ramsey_anharmonicity;
use mechq::sequences::Simulator;
use mechq::DeviceParams;

fn main() -> mechq::Result<()> {
    let params = DeviceParams::default();
    let sim = Simulator::new(params);
    let omega_ad = TAU * 100e3;
    for delta_mhz in [-2.0, -1.0, -0.71] {
        let delta = TAU * delta_mhz * 1e6;
        let record = sim.run_ramsey_anharmonicity(delta, omega_ad, 50e-6, 101)?;
        let eps = params.g / delta;
        let gamma1 = params.phonon_gamma1() + eps * eps * params.qubit_gamma1();
        let fit = fit_ramsey_anharmonicity(&record, gamma1, omega_ad)?;
        let expected = device::anharmonicity(delta, params.g)?;
        let alpha = fit.value("alpha")?;
        println!(
            "delta {delta_mhz:5.2} MHz  fitted {:8.3} kHz  theory {:8.3} kHz  ({:+.2}%)",
            alpha / TAU / 1e3,
            expected / TAU / 1e3,
            100.0 * (alpha / expected - 1.0)
        );
    }
    Ok(())
}
