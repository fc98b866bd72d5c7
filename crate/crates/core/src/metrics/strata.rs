use serde::{Deserialize, Serialize};

use crate::data::LogitDataset;
use crate::error::{Error, Result};
use crate::scores::{free_energy, label_rank, softmax_with_temperature};

use super::{average_set_size, PredictionSet};

fn check_intervals(bins: &[(usize, usize)]) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::domain("at least one interval is required"));
    }
    for (i, &(lo, hi)) in bins.iter().enumerate() {
        if lo > hi {
            return Err(Error::domain(format!("interval {lo}-{hi} is reversed")));
        }
        if i > 0 && lo <= bins[i - 1].1 {
            return Err(Error::domain("intervals must be increasing and disjoint"));
        }
    }
    Ok(())
}

/// Clip the standard edges `1, 2-3, 4-6, 7-10, 11-100, 101-K` to `[first, K]`.
fn standard_edges(first: usize, class_count: usize) -> Vec<(usize, usize)> {
    [(first, 1), (2, 3), (4, 6), (7, 10), (11, 100), (101, usize::MAX)]
        .into_iter()
        .filter(|&(lo, _)| lo <= class_count)
        .map(|(lo, hi)| (lo, hi.min(class_count)))
        .collect()
}

/// Set-size strata used by the size-stratified coverage violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeStrata {
    bins: Vec<(usize, usize)>,
}

impl SizeStrata {
    pub fn new(bins: Vec<(usize, usize)>) -> Result<Self> {
        check_intervals(&bins)?;
        Ok(Self { bins })
    }

    /// `0-1, 2-3, 4-6, 7-10, 11-100, 101-K`.
    pub fn default_for(class_count: usize) -> Self {
        Self {
            bins: standard_edges(0, class_count),
        }
    }

    pub fn bins(&self) -> &[(usize, usize)] {
        &self.bins
    }
}

/// Difficulty bins over the rank of the true label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyBins {
    edges: Vec<(usize, usize)>,
}

impl DifficultyBins {
    /// Bins must be disjoint, increasing and cover `[1, K]` exactly.
    pub fn new(edges: Vec<(usize, usize)>, class_count: usize) -> Result<Self> {
        check_intervals(&edges)?;
        let contiguous = edges.windows(2).all(|w| w[1].0 == w[0].1 + 1);
        if edges[0].0 != 1 || edges.last().unwrap().1 != class_count || !contiguous {
            return Err(Error::domain(format!("difficulty bins must cover ranks 1..={class_count}")));
        }
        Ok(Self { edges })
    }

    pub fn default_for(class_count: usize) -> Self {
        Self {
            edges: standard_edges(1, class_count),
        }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn bin_of(&self, rank: usize) -> Option<usize> {
        self.edges.iter().position(|&(lo, hi)| (lo..=hi).contains(&rank))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRow {
    pub bin: String,
    pub rank_lo: usize,
    pub rank_hi: usize,
    pub count: usize,
    pub coverage: Option<f64>,
    pub avg_size: Option<f64>,
    pub mean_neg_energy: Option<f64>,
}

/// Coverage, set size and mean `-F` per difficulty bin, where difficulty is
/// the rank of the true label under the softmax at `softmax_temperature`.
pub fn stratified_report(
    ds: &LogitDataset,
    softmax_temperature: f64,
    energy_temperature: f64,
    sets: &[PredictionSet],
    bins: &DifficultyBins,
) -> Result<Vec<DifficultyRow>> {
    if sets.len() != ds.len() {
        return Err(Error::domain(format!("{} sets for {} samples", sets.len(), ds.len())));
    }
    let nb = bins.edges().len();
    let mut count = vec![0usize; nb];
    let mut hits = vec![0usize; nb];
    let mut sizes = vec![0usize; nb];
    let mut neg_f = vec![0.0f64; nb];
    for (i, set) in sets.iter().enumerate() {
        let probs = softmax_with_temperature(ds.row(i), softmax_temperature)?;
        let y = ds.label(i);
        let Some(b) = bins.bin_of(label_rank(&probs, y)?) else {
            continue;
        };
        count[b] += 1;
        hits[b] += set.binary_search(&y).is_ok() as usize;
        sizes[b] += set.len();
        neg_f[b] -= free_energy(ds.row(i), energy_temperature)?;
    }
    Ok(bins
        .edges()
        .iter()
        .enumerate()
        .map(|(b, &(lo, hi))| {
            let n = count[b] as f64;
            let avg = |x: f64| (count[b] > 0).then(|| x / n);
            DifficultyRow {
                bin: format!("{lo} to {hi}"),
                rank_lo: lo,
                rank_hi: hi,
                count: count[b],
                coverage: avg(hits[b] as f64),
                avg_size: avg(sizes[b] as f64),
                mean_neg_energy: avg(neg_f[b]),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub p_empty_id: f64,
    pub p_empty_ood: f64,
    pub mean_size_id: f64,
    pub mean_size_ood: f64,
    pub mean_nonempty_size_id: Option<f64>,
    pub mean_nonempty_size_ood: Option<f64>,
    pub small_k: usize,
    /// Fraction of OOD sets with `1 <= |C| <= small_k`.
    pub p_small_ood: f64,
}

fn nonempty_mean(sets: &[PredictionSet]) -> Option<f64> {
    let sizes: Vec<usize> = sets.iter().map(Vec::len).filter(|&s| s > 0).collect();
    (!sizes.is_empty()).then(|| sizes.iter().sum::<usize>() as f64 / sizes.len() as f64)
}

fn fraction(sets: &[PredictionSet], pred: impl Fn(usize) -> bool) -> f64 {
    sets.iter().filter(|s| pred(s.len())).count() as f64 / sets.len() as f64
}

pub fn ood_desiderata_report(sets_id: &[PredictionSet], sets_ood: &[PredictionSet], small_k: usize) -> Result<OodReport> {
    if sets_id.is_empty() || sets_ood.is_empty() {
        return Err(Error::domain("OOD report needs nonempty ID and OOD set lists"));
    }
    Ok(OodReport {
        p_empty_id: fraction(sets_id, |s| s == 0),
        p_empty_ood: fraction(sets_ood, |s| s == 0),
        mean_size_id: average_set_size(sets_id)?,
        mean_size_ood: average_set_size(sets_ood)?,
        mean_nonempty_size_id: nonempty_mean(sets_id),
        mean_nonempty_size_ood: nonempty_mean(sets_ood),
        small_k,
        p_small_ood: fraction(sets_ood, |s| (1..=small_k).contains(&s)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_edges() {
        assert_eq!(
            DifficultyBins::default_for(1000).edges(),
            &[(1, 1), (2, 3), (4, 6), (7, 10), (11, 100), (101, 1000)]
        );
        assert_eq!(DifficultyBins::default_for(5).edges(), &[(1, 1), (2, 3), (4, 5)]);
        assert_eq!(SizeStrata::default_for(100).bins().last(), Some(&(11, 100)));
        assert_eq!(SizeStrata::default_for(100).bins()[0], (0, 1));
        assert!(DifficultyBins::new(vec![(1, 2), (4, 5)], 5).is_err());
        assert!(DifficultyBins::new(vec![(1, 2), (3, 4)], 5).is_err());
        assert!(DifficultyBins::new(vec![(1, 2), (3, 5)], 5).is_ok());
    }

    #[test]
    fn planted_ranks_fill_each_bin_once() {
        let k = 1000;
        let ranks = [1usize, 2, 5, 8, 50, 500];
        let mut rows = Vec::new();
        for &r in &ranks {
            // label 0 gets the r-th largest logit
            let mut row: Vec<f64> = (0..k).map(|j| -(j as f64) * 0.01).collect();
            row.swap(0, r - 1);
            rows.push((0u32, row));
        }
        let ds = LogitDataset::from_rows(k, &rows).unwrap();
        let sets: Vec<PredictionSet> = vec![vec![0]; ranks.len()];
        let table = stratified_report(&ds, 1.0, 1.0, &sets, &DifficultyBins::default_for(k)).unwrap();
        assert_eq!(table.iter().map(|r| r.count).collect::<Vec<_>>(), vec![1; 6]);
        assert_eq!(table[0].bin, "1 to 1");
    }

    #[test]
    fn all_rank_one_lands_in_first_bin() {
        let ds = LogitDataset::from_rows(3, &[(0, vec![3.0, 0.0, 0.0]), (2, vec![0.0, 0.0, 1.0])]).unwrap();
        let sets = vec![vec![0], vec![1]];
        let table = stratified_report(&ds, 1.0, 1.0, &sets, &DifficultyBins::default_for(3)).unwrap();
        assert_eq!(table[0].count, 2);
        assert_eq!(table[0].coverage, Some(0.5));
        assert_eq!(table[1].count, 0);
        assert_eq!(table[1].coverage, None);
    }

    #[test]
    fn ood_examples() {
        let id: Vec<PredictionSet> = vec![vec![0]; 4];
        let ood: Vec<PredictionSet> = vec![vec![], vec![], vec![0, 1], (0..5).collect()];
        let r = ood_desiderata_report(&id, &ood, 2).unwrap();
        assert_eq!(r.p_empty_ood, 0.5);
        assert_eq!(r.p_small_ood, 0.25);
        assert_eq!(r.mean_nonempty_size_ood, Some(3.5));
        let same = ood_desiderata_report(&id, &id, 2).unwrap();
        assert_eq!(same.mean_size_id, same.mean_size_ood);
        assert_eq!(same.p_empty_id, same.p_empty_ood);
        let full: Vec<PredictionSet> = vec![(0..100).collect(); 3];
        let r = ood_desiderata_report(&id, &full, 2).unwrap();
        assert_eq!((r.mean_size_ood, r.p_small_ood), (100.0, 0.0));
    }
}
