//! Phonon-number readout: vacuum-Rabi traces of a known Fock mixture,
//! sampled with shot noise, inverted back to populations on the simplex.

use mechq::estimation::rpn_fit;
use mechq::sequences::{uniform_grid, MeasurementRecord, Simulator, DEFAULT_RPN_POINTS, DEFAULT_RPN_WINDOW};
use mechq::{DeviceParams, QuantumState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mechq::Result<()> {
    let params = DeviceParams::default();
    let sim = Simulator::new(params);
    let truth = [0.45, 0.35, 0.15, 0.05];
    let phonon = QuantumState::fock_mixture(params.dim_fock, &truth)?;
    let times = uniform_grid(DEFAULT_RPN_WINDOW, DEFAULT_RPN_POINTS);
    let record = MeasurementRecord { sequence_id: "rpn/example".into(), delta: 0.0, p_excited: sim.rpn_trace_for_phonon(&phonon, &times)?, times };

    let exact = rpn_fit(&record, &params, 3)?;
    println!("truth     {truth:?}");
    println!("noiseless {:.4?}  TV {:.2e}", exact.populations(), exact.total_variation(&truth));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for shots in [200, 2000, 20000] {
        let noisy = record.with_shot_noise(shots, &mut rng)?;
        let d = rpn_fit(&noisy, &params, 3)?;
        println!("{shots:>6} shots {:.4?}  TV {:.3}", d.populations(), d.total_variation(&truth));
    }
    Ok(())
}
