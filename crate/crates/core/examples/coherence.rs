//! Phonon T1 and T2 from direct-pulse protocols at a far detuning.

use mechq::estimation::{fit_decaying_cosine, fit_exponential};
use mechq::sequences::{uniform_grid, PhononProtocol, PhononReadout, Simulator};
use mechq::DeviceParams;
use std::f64::consts::TAU;

fn main() -> mechq::Result<()> {
    let params = DeviceParams::default();
    let sim = Simulator::new(params);
    let times = uniform_grid(400e-6, 101);

    let t1_protocol = PhononProtocol { readout: PhononReadout::MeanNumber, ..PhononProtocol::default() };
    let t1 = fit_exponential(&sim.run_phonon_t1(&times, &t1_protocol)?)?.value("T1")?;
    println!("T1 = {:.1} us (configured {:.1} us)", t1 * 1e6, params.t1_p * 1e6);

    let t2_record = sim.run_phonon_t2_ramsey(&times, TAU * 20e3, &PhononProtocol::default())?;
    let t2 = fit_decaying_cosine(&t2_record)?.value("T2")?;
    println!("T2 = {:.1} us (configured {:.1} us)", t2 * 1e6, params.t2_p * 1e6);
    Ok(())
}
