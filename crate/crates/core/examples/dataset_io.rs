//! Logit datasets on disk: CSV (`label,l0,l1,...`) and the binary format,
//! chosen by file extension.

use energy_cp::data::{empirical_priors, load_dataset, save_dataset, LogitDataset};

fn main() -> energy_cp::Result<()> {
    let ds = LogitDataset::from_rows(
        3,
        &[(0, vec![2.0, 0.5, -1.0]), (2, vec![0.1, 0.2, 3.0]), (1, vec![-0.5, 1.5, 1.0])],
    )?;
    let dir = std::env::temp_dir();
    for name in ["ecp_example.csv", "ecp_example.ecpl"] {
        let path = dir.join(name);
        save_dataset(&ds, &path)?;
        let back = load_dataset(&path)?;
        println!("{}: {} rows, {} classes, {} bytes", path.display(), back.len(), back.class_count(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    }
    let emp = empirical_priors(&ds);
    println!("empirical priors {:?}, absent classes {:?}", emp.priors.as_slice(), emp.absent_classes);
    Ok(())
}
