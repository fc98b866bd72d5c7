//! Max-softmax, entropy and negative free energy of a 2-D classifier over a
//! grid, plus ray probes showing softmax saturation away from the boundary.

use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::{free_energy, shannon_entropy, softmax_with_temperature};

use super::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            xmin: -1.5,
            xmax: 1.5,
            ymin: -1.5,
            ymax: 1.5,
        }
    }
}

/// Row-major grids (`y` outer, `x` inner) of size `resolution²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub bounds: Bounds,
    pub resolution: usize,
    pub tau: f64,
    pub max_softmax: Vec<f64>,
    pub entropy: Vec<f64>,
    pub neg_free_energy: Vec<f64>,
}

impl LandscapeGrid {
    pub fn coordinate(&self, ix: usize, iy: usize) -> (f64, f64) {
        let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (self.resolution - 1) as f64;
        (
            step(self.bounds.xmin, self.bounds.xmax, ix),
            step(self.bounds.ymin, self.bounds.ymax, iy),
        )
    }

    /// CSV with header `x,y,max_softmax,entropy,neg_energy`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x,y,max_softmax,entropy,neg_energy\n");
        let r = self.resolution;
        for iy in 0..r {
            for ix in 0..r {
                let (x, y) = self.coordinate(ix, iy);
                let c = iy * r + ix;
                out.push_str(&format!(
                    "{x:?},{y:?},{:?},{:?},{:?}\n",
                    self.max_softmax[c], self.entropy[c], self.neg_free_energy[c]
                ));
            }
        }
        out
    }
}

pub fn landscape_grid(mlp: &Mlp, bounds: Bounds, resolution: usize, tau: f64) -> Result<LandscapeGrid> {
    if resolution < 2 {
        return Err(Error::domain("landscape resolution must be at least 2"));
    }
    if !(bounds.xmin < bounds.xmax && bounds.ymin < bounds.ymax) {
        return Err(Error::domain("landscape bounds are empty"));
    }
    let mut grid = LandscapeGrid {
        bounds,
        resolution,
        tau,
        max_softmax: Vec::new(),
        entropy: Vec::new(),
        neg_free_energy: Vec::new(),
    };
    let cells: Vec<(f64, f64, f64)> = (0..resolution * resolution)
        .into_par_iter()
        .map(|c| {
            let (x, y) = grid.coordinate(c % resolution, c / resolution);
            let f = mlp.forward(&[x, y]);
            let p = softmax_with_temperature(&f, 1.0)?;
            let pmax = p.iter().copied().fold(0.0, f64::max);
            Ok((pmax, shannon_entropy(&p), -free_energy(&f, tau)?))
        })
        .collect::<Result<_>>()?;
    for (p, h, e) in cells {
        grid.max_softmax.push(p);
        grid.entropy.push(h);
        grid.neg_free_energy.push(e);
    }
    Ok(grid)
}

/// Sensitivities at the far end of one ray from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayProbe {
    pub angle: f64,
    /// Radius of the outermost label change along the ray, if any.
    pub boundary_radius: Option<f64>,
    pub end_radius: f64,
    pub logit_gap: f64,
    pub dpi_max_at_boundary: Option<f64>,
    /// Central difference of `max softmax` w.r.t. the dominant logit.
    pub dpi_max: f64,
    /// Central difference of `-F` w.r.t. the dominant logit.
    pub dneg_energy: f64,
}

fn dominant_sensitivities(f: &[f64], tau: f64) -> Result<(f64, f64)> {
    let k = (0..f.len()).fold(0, |b, j| if f[j] > f[b] { j } else { b });
    let h = 1e-5 * f[k].abs().max(1.0);
    let mut up = f.to_vec();
    let mut down = f.to_vec();
    up[k] += h;
    down[k] -= h;
    let pmax = |v: &[f64]| -> Result<f64> { Ok(softmax_with_temperature(v, 1.0)?[k]) };
    let dpi = (pmax(&up)? - pmax(&down)?) / (2.0 * h);
    let de = (free_energy(&down, tau)? - free_energy(&up, tau)?) / (2.0 * h);
    Ok((dpi, de))
}

fn gap(mlp: &Mlp, r: f64, angle: f64) -> f64 {
    let f = mlp.forward(&[r * angle.cos(), r * angle.sin()]);
    f[1] - f[0]
}

/// Probe `n_rays` evenly spaced rays out to `end_radius`.
pub fn saturation_rays(mlp: &Mlp, n_rays: usize, end_radius: f64, tau: f64) -> Result<Vec<RayProbe>> {
    if mlp.output_dim() != 2 || mlp.input_dim() != 2 {
        return Err(Error::domain("saturation rays need a 2-D, two-class network"));
    }
    if end_radius.is_nan() || end_radius <= 0.0 || n_rays == 0 {
        return Err(Error::domain("need at least one ray and a positive end radius"));
    }
    let steps = 2000;
    (0..n_rays)
        .map(|i| {
            let angle = TAU * i as f64 / n_rays as f64;
            let mut boundary = None;
            let mut prev = gap(mlp, 0.0, angle);
            for s in 1..=steps {
                let r = end_radius * s as f64 / steps as f64;
                let cur = gap(mlp, r, angle);
                if (prev < 0.0) != (cur < 0.0) {
                    let (mut lo, mut hi) = (end_radius * (s - 1) as f64 / steps as f64, r);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if (gap(mlp, mid, angle) < 0.0) == (prev < 0.0) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    boundary = Some(0.5 * (lo + hi));
                }
                prev = cur;
            }
            let dpi_max_at_boundary = match boundary {
                Some(r) => Some(dominant_sensitivities(&mlp.forward(&[r * angle.cos(), r * angle.sin()]), tau)?.0),
                None => None,
            };
            let f = mlp.forward(&[end_radius * angle.cos(), end_radius * angle.sin()]);
            let (dpi_max, dneg_energy) = dominant_sensitivities(&f, tau)?;
            Ok(RayProbe {
                angle,
                boundary_radius: boundary,
                end_radius,
                logit_gap: (f[1] - f[0]).abs(),
                dpi_max_at_boundary,
                dpi_max,
                dneg_energy,
            })
        })
        .collect()
}
