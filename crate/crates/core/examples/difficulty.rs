//! Negative free energy against the rank of the true label: harder samples
//! (larger rank) carry less energy mass.

use energy_cp::metrics::welch_one_tailed_p;
use energy_cp::scores::{free_energy, label_rank, softmax_with_temperature};
use energy_cp::stats::mean;
use energy_cp::synth::{generate_synthetic, SynthConfig};

fn main() -> energy_cp::Result<()> {
    let data = generate_synthetic(&SynthConfig {
        flip_temperature: Some(2.0),
        ..SynthConfig::new(100, 50_000, 3)
    })?;
    let bins = [(1, 1), (2, 3), (4, 6), (7, 10), (11, 100)];
    let mut groups = vec![Vec::new(); bins.len()];
    for i in 0..data.len() {
        let rank = label_rank(&softmax_with_temperature(data.row(i), 1.0)?, data.label(i))?;
        if let Some(b) = bins.iter().position(|&(lo, hi)| (lo..=hi).contains(&rank)) {
            groups[b].push(-free_energy(data.row(i), 1.0)?);
        }
    }
    for (b, &(lo, hi)) in bins.iter().enumerate() {
        print!("rank {lo:>3}..{hi:<3} n {:>6}  mean -F {:.3}", groups[b].len(), mean(&groups[b]));
        if b > 0 && groups[b].len() > 1 {
            print!("  p(harder < easier) {:.2e}", welch_one_tailed_p(&groups[b], &groups[b - 1])?);
        }
        println!();
    }
    Ok(())
}
