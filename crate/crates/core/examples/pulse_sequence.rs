//! Builds a sequence by hand: excite the qubit, swap the excitation into the
//! phonon, park it at a far detuning, swap back and read the qubit.

use mechq::sequences::{PulseSequence, SequenceSegment, Simulator, DEFAULT_FAR_DELTA};
use mechq::DeviceParams;

fn main() -> mechq::Result<()> {
    let params = DeviceParams::default();
    let sim = Simulator::new(params);
    for wait_us in [0.0, 25.0, 50.0, 100.0, 200.0] {
        let seq = PulseSequence::new("swap-store")
            .then(SequenceSegment::QubitPi { phase: 0.0 })
            .then(SequenceSegment::Iswap { manifold: 1 })
            .then(SequenceSegment::StarkShift { delta: DEFAULT_FAR_DELTA })
            .then(SequenceSegment::Wait { duration: wait_us * 1e-6 })
            .then(SequenceSegment::Iswap { manifold: 1 });
        let s = sim.run(&seq)?;
        println!("stored {wait_us:5.1} us: P(e) = {:.4}", s.excited_probability());
    }
    Ok(())
}
