//! Train the two-ring MLP, write the confidence landscape and probe rays
//! that leave the data: the softmax saturates while -F keeps growing.
//!
//! Usage: cargo run --release --example saturation [OUT_DIR]

use std::path::PathBuf;

use energy_cp::synth::{landscape_grid, make_rings, saturation_rays, train_mlp, Bounds, TrainConfig};

fn main() -> energy_cp::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let data = make_rings(1000, 0.5, 1.0, 0.05, 0)?;
    let trained = train_mlp(&data, &TrainConfig::default())?;
    let last = trained.trace.last().unwrap();
    println!("epoch {}: loss {:.5}, accuracy {:.4}", last.epoch, last.loss, last.accuracy);

    let grid = landscape_grid(&trained.mlp, Bounds::default(), 200, 1.0)?;
    let path = out.join("ring_landscape.csv");
    grid.write_csv(&path)?;
    println!("landscape written to {}", path.display());

    println!("{:>6} {:>9} {:>10} {:>12} {:>10}", "angle", "boundary", "logit gap", "dπmax/df", "d(-F)/df");
    for r in saturation_rays(&trained.mlp, 8, 4.0, 1.0)? {
        println!(
            "{:6.3} {:>9} {:10.3} {:12.3e} {:10.6}",
            r.angle,
            r.boundary_radius.map_or("-".into(), |b| format!("{b:.3}")), r.logit_gap, r.dpi_max, r.dneg_energy
        );
    }
    Ok(())
}
