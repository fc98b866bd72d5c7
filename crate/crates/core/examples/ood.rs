//! Out-of-distribution inputs with shrunken logits: energy-modulated APS
//! inflates their sets toward the full label set while in-distribution sets
//! stay the same size.

use energy_cp::data::{split_dataset, SplitSpec};
use energy_cp::metrics::ood_desiderata_report;
use energy_cp::scores::{BaseScore, Modulation, ScoreParams};
use energy_cp::synth::{generate_ood, generate_synthetic, SynthConfig};
use energy_cp::calibrate;

fn main() -> energy_cp::Result<()> {
    // near-constant logit magnitude keeps in-distribution sets comparable
    let cfg = SynthConfig::homogeneous(100, 12_000, 9);
    let data = generate_synthetic(&cfg)?;
    let (cal, test) = split_dataset(&data, SplitSpec { calibration_fraction: 0.5, seed: 0 })?;
    let ood = generate_ood(&SynthConfig { seed: 10, sample_count: 5000, ..cfg }, 0.1)?;

    for modulation in [Modulation::None, Modulation::Energy] {
        let params = ScoreParams::new(BaseScore::Aps).with_modulation(modulation);
        let pred = calibrate(&cal, &params, 0.05, 0)?;
        let r = ood_desiderata_report(&pred.predict_batch(&test)?, &pred.predict_batch(&ood)?, 1)?;
        println!(
            "{:<11} ID size {:6.3}  OOD size {:6.2}  P(empty) ID {:.3} OOD {:.3}  P(1 <= |C| <= 1 | OOD) {:.3}",
            params.variant_name(),
            r.mean_size_id,
            r.mean_size_ood,
            r.p_empty_id,
            r.p_empty_ood,
            r.p_small_ood
        );
    }
    Ok(())
}
