//! Multi-seed comparison of every base score against its energy-modulated
//! variant, with a one-tailed Welch test on the per-seed set sizes.

use energy_cp::cli::{run_experiment, ExperimentConfig};
use energy_cp::scores::{BaseScore, Modulation};
use energy_cp::synth::SynthConfig;

fn main() -> energy_cp::Result<()> {
    for score in BaseScore::ALL {
        let cfg = ExperimentConfig {
            synth: SynthConfig {
                flip_temperature: Some(2.0),
                ..SynthConfig::new(100, 12_000, 1)
            },
            score,
            modulation: Modulation::Energy,
            compare_base: true,
            alphas: vec![0.1],
            wsc_delta: None,
            difficulty_table: false,
            ..Default::default()
        };
        let report = run_experiment(&cfg)?;
        for row in &report.aggregate {
            let m = &row.metrics;
            println!(
                "{:<12} coverage {:.4}  size {:7.3}  macro-cov {:.4}  sscv {:.4}",
                row.variant, m["coverage"].mean, m["avg_size"].mean, m["macro_cov"].mean, m["sscv"].mean
            );
        }
        for w in &report.welch {
            println!("  {} < {}: t = {:.3}, df = {:.1}, p = {:.3e}", w.variant, w.baseline, w.t, w.df, w.p);
        }
    }
    Ok(())
}
