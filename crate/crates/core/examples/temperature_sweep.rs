//! Grid over softmax and energy temperatures, reduced to the smallest sets
//! that still reach the target coverage.

use energy_cp::cli::{load_experiment_data, run_sweep, select_min_size_subject_to_coverage, sweep_csv_string, ExperimentConfig, SweepGrid};
use energy_cp::scores::{BaseScore, Modulation};
use energy_cp::synth::SynthConfig;

fn main() -> energy_cp::Result<()> {
    let cfg = ExperimentConfig {
        synth: SynthConfig::new(50, 6000, 7),
        score: BaseScore::Saps,
        modulation: Modulation::Energy,
        seeds: (0..3).collect(),
        alphas: vec![0.1],
        ..Default::default()
    };
    let grid = SweepGrid {
        softmax_temperatures: vec![0.5, 1.0, 2.0, 4.0],
        energy_temperatures: vec![0.5, 1.0, 2.0],
        betas: vec![1.0],
    };
    let data = load_experiment_data(&cfg)?;
    let rows = run_sweep(&cfg, &data, &grid)?;
    print!("{}", sweep_csv_string(&rows)?);
    println!("selected:");
    print!("{}", sweep_csv_string(&select_min_size_subject_to_coverage(&rows))?);
    Ok(())
}
