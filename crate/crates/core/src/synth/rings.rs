use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};

/// Two concentric rings; class 0 is the inner ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingData {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
}

impl RingData {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `x,y,label`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{other:?}")),
        })?;
        w.write_record(["x", "y", "label"])?;
        for (p, y) in self.points.iter().zip(&self.labels) {
            w.write_record([format!("{:?}", p[0]), format!("{:?}", p[1]), y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `n` points alternating between the rings, radius jittered by `N(0, noise²)`
/// and angle uniform.
pub fn make_rings(n: usize, r_inner: f64, r_outer: f64, noise: f64, seed: u64) -> Result<RingData> {
    if !(r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
        return Err(Error::domain(format!(
            "ring radii must satisfy 0 < r_inner < r_outer, got {r_inner} and {r_outer}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::domain(format!("ring noise must be >= 0, got {noise}")));
    }
    let rng = CounterRng::new(seed, streams::RINGS);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = rng.at(i as u64);
        let label = i % 2;
        let base = if label == 0 { r_inner } else { r_outer };
        let angle = TAU * s.uniform();
        let r = base + noise * s.normal();
        points.push([r * angle.cos(), r * angle.sin()]);
        labels.push(label);
    }
    Ok(RingData { points, labels })
}
