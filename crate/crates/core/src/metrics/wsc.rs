//! Worst-slab coverage: the lowest coverage over slabs `a <= v·x <= b`
//! holding at least `⌈δN⌉` samples, minimized over random directions `v`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};

use super::{coverage_indicators, PredictionSet};

pub const DEFAULT_WSC_DELTA: f64 = 0.25;
pub const DEFAULT_WSC_DIRECTIONS: usize = 100;

/// A window's coverage as the exact fraction `hits / len`.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    hits: i64,
    len: i64,
}

impl Ratio {
    fn less_than(self, other: Ratio) -> bool {
        (self.hits as i128) * (other.len as i128) < (other.hits as i128) * (self.len as i128)
    }
}

/// Minimum mean over contiguous windows of length `>= min_len` of a 0/1
/// sequence. Exact, `O(N log N)`: for each right end the best left end is
/// the tangent from the prefix-sum point to the upper hull of earlier
/// prefix-sum points.
fn min_window_mean(hits: &[bool], min_len: usize) -> Ratio {
    let n = hits.len();
    let mut prefix = vec![0i64; n + 1];
    for (i, &h) in hits.iter().enumerate() {
        prefix[i + 1] = prefix[i] + h as i64;
    }
    let pt = |i: usize| (i as i64, prefix[i]);
    // slope from hull point a to query point q, compared exactly
    let slope_lt = |a: (i64, i64), b: (i64, i64), q: (i64, i64)| {
        ((q.1 - a.1) as i128) * ((q.0 - b.0) as i128) < ((q.1 - b.1) as i128) * ((q.0 - a.0) as i128)
    };
    let mut hull: Vec<(i64, i64)> = Vec::new();
    let mut best = Ratio {
        hits: prefix[n],
        len: n as i64,
    };
    for j in min_len..=n {
        let p = pt(j - min_len);
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) as i128 * (p.1 - o.1) as i128 - (a.1 - o.1) as i128 * (p.0 - o.0) as i128;
            if cross >= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
        let q = pt(j);
        // first k where slope(hull[k+1], q) is not below slope(hull[k], q)
        let (mut lo, mut hi) = (0usize, hull.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if slope_lt(hull[mid + 1], hull[mid], q) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let a = hull[lo];
        let r = Ratio {
            hits: q.1 - a.1,
            len: q.0 - a.0,
        };
        if r.less_than(best) {
            best = r;
        }
    }
    best
}

fn direction(rng: CounterRng, index: usize, dim: usize) -> Vec<f64> {
    let mut s = rng.at(index as u64);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| s.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Worst-slab coverage from per-sample coverage indicators.
/// `features` is row-major with `dim` columns.
pub fn worst_slab_coverage_indicators(
    features: &[f64],
    dim: usize,
    covered: &[bool],
    delta: f64,
    n_directions: usize,
    seed: u64,
) -> Result<f64> {
    let n = covered.len();
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("WSC delta must lie in (0, 1], got {delta}")));
    }
    if n < 2 {
        return Err(Error::domain("WSC needs at least two samples"));
    }
    if delta * (n as f64) < 1.0 {
        return Err(Error::domain("WSC window would hold fewer than one sample"));
    }
    if n_directions == 0 {
        return Err(Error::domain("WSC needs at least one direction"));
    }
    if dim == 0 || features.len() != n * dim {
        return Err(Error::domain("feature matrix does not match the number of samples"));
    }
    let min_len = ((delta * n as f64).ceil() as usize).min(n);
    let rng = CounterRng::new(seed, streams::SLAB_DIRECTIONS);
    let worst = (0..n_directions)
        .into_par_iter()
        .map(|d| {
            let v = direction(rng, d, dim);
            let proj: Vec<f64> = features
                .chunks_exact(dim)
                .map(|x| x.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
            let sorted: Vec<bool> = order.iter().map(|&i| covered[i]).collect();
            min_window_mean(&sorted, min_len)
        })
        .reduce_with(|a, b| if b.less_than(a) { b } else { a })
        .expect("at least one direction");
    Ok(worst.hits as f64 / worst.len as f64)
}

pub fn worst_slab_coverage(
    features: &[f64],
    dim: usize,
    sets: &[PredictionSet],
    labels: &[u32],
    delta: f64,
    n_directions: usize,
    seed: u64,
) -> Result<f64> {
    let covered = coverage_indicators(sets, labels)?;
    worst_slab_coverage_indicators(features, dim, &covered, delta, n_directions, seed)
}
