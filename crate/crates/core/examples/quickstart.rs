//! Calibrate a split-conformal predictor on synthetic logits and inspect a
//! few prediction sets.

use energy_cp::data::{split_dataset, SplitSpec};
use energy_cp::metrics::{average_set_size, empirical_coverage};
use energy_cp::scores::{BaseScore, Modulation, ScoreParams};
use energy_cp::synth::{generate_synthetic, SynthConfig};
use energy_cp::calibrate;

fn main() -> energy_cp::Result<()> {
    let data = generate_synthetic(&SynthConfig {
        flip_temperature: Some(2.0),
        ..SynthConfig::new(20, 4000, 0)
    })?;
    let (cal, test) = split_dataset(&data, SplitSpec { calibration_fraction: 0.5, seed: 0 })?;

    let params = ScoreParams::new(BaseScore::Raps).with_modulation(Modulation::Energy);
    let predictor = calibrate(&cal, &params, 0.1, 0)?;
    println!("{}: qhat = {:.6} from {} samples", params.variant_name(), predictor.qhat, predictor.calibration_size);

    let sets = predictor.predict_batch(&test)?;
    for (i, set) in sets.iter().take(5).enumerate() {
        println!("sample {i} (label {}): {set:?}", test.label(i));
    }
    println!(
        "coverage {:.4}, average size {:.3}",
        empirical_coverage(&sets, test.labels())?,
        average_set_size(&sets)?
    );
    Ok(())
}
