//! The full evaluation report for one set of prediction sets: marginal and
//! class-wise coverage, size-stratified violation, worst-slab coverage and
//! the difficulty table.

use energy_cp::data::{split_dataset, SplitSpec};
use energy_cp::metrics::{evaluate_sets, EvalOptions};
use energy_cp::scores::{BaseScore, Modulation, ScoreParams};
use energy_cp::synth::{generate_synthetic, SynthConfig};
use energy_cp::calibrate;

fn main() -> energy_cp::Result<()> {
    let data = generate_synthetic(&SynthConfig {
        flip_temperature: Some(2.0),
        ..SynthConfig::new(50, 10_000, 2)
    })?;
    let (cal, test) = split_dataset(&data, SplitSpec { calibration_fraction: 0.4, seed: 1 })?;
    let params = ScoreParams::new(BaseScore::Raps).with_modulation(Modulation::Energy);
    let sets = calibrate(&cal, &params, 0.1, 1)?.predict_batch(&test)?;

    let report = evaluate_sets(&test, &sets, 0.1, 1.0, 1.0, &EvalOptions::default())?;
    println!("coverage {:.4}  avg size {:.3}", report.coverage, report.avg_size);
    println!("macro coverage {:.4}  coverage gap {:.3}%", report.macro_cov, report.cov_gap_percent);
    println!("SSCV {:.4}  WSC {:.4?} (δ = {:?})", report.sscv, report.wsc, report.wsc_delta);
    println!("size histogram {:?}", report.size_histogram);
    for row in report.difficulty_table.iter().flatten() {
        println!(
            "rank {:>9}: n {:>5} coverage {:.3?} size {:.2?} mean -F {:.2?}",
            row.bin, row.count, row.coverage, row.avg_size, row.mean_neg_energy
        );
    }
    println!("{}", serde_json::to_string_pretty(&report.config)?);
    Ok(())
}
