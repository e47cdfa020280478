//! Direct phonon Rabi drive through the qubit charge line. Each duration is
//! read out with an RPN trace; the fitted populations give the oscillation.

use std::f64::consts::{PI, TAU};

use mechq::device;
use mechq::sequences::{Simulator, DEFAULT_PHONON_RABI};
use mechq::DeviceParams;

fn main() -> mechq::Result<()> {
    let params = DeviceParams::default();
    let sim = Simulator::new(params);
    let t_pi = PI / DEFAULT_PHONON_RABI;
    let durations: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64 * t_pi).collect();
    for point in sim.mech_rabi_points(DEFAULT_PHONON_RABI, 0.0, &durations)? {
        let p = &point.phonon_populations;
        println!("t = {:6.2} us  P0 {:.3}  P1 {:.3}  P2 {:.3}  Pe {:.3}", point.duration * 1e6, p[0], p[1], p[2], point.qubit_excited);
    }
    let pi_point = &sim.mech_rabi_points(DEFAULT_PHONON_RABI, 0.0, &[t_pi])?[0];
    let estimate = device::qubit_population_estimate(params.delta, params.g, &pi_point.phonon_populations)?;
    println!("pi pulse ({:.1} kHz): dressed-qubit population estimate {:.3}", DEFAULT_PHONON_RABI / TAU / 1e3, estimate);
    Ok(())
}
