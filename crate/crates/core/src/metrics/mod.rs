//! Evaluation metrics over prediction sets: marginal and class-conditional
//! coverage, set size, size-stratified violation, worst-slab coverage,
//! difficulty-stratified tables and the OOD set-size report.

mod report;
mod strata;
mod wsc;

pub use report::{evaluate_sets, EvalOptions, EvalReport, MetricsConfig};
pub use strata::{ood_desiderata_report, stratified_report, DifficultyBins, DifficultyRow, OodReport, SizeStrata};
pub use wsc::{worst_slab_coverage, worst_slab_coverage_indicators, DEFAULT_WSC_DELTA, DEFAULT_WSC_DIRECTIONS};

pub use crate::stats::welch_one_tailed_p;

use crate::error::{Error, Result};

pub type PredictionSet = Vec<usize>;

fn check_lengths(sets: &[PredictionSet], labels: &[u32]) -> Result<()> {
    if sets.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} prediction sets but {} labels",
            sets.len(),
            labels.len()
        )));
    }
    if sets.is_empty() {
        return Err(Error::domain("no prediction sets to evaluate"));
    }
    Ok(())
}

/// `y ∈ C` for each sample. Sets are sorted, so a binary search suffices.
pub fn coverage_indicators(sets: &[PredictionSet], labels: &[u32]) -> Result<Vec<bool>> {
    check_lengths(sets, labels)?;
    Ok(sets
        .iter()
        .zip(labels)
        .map(|(s, &y)| s.binary_search(&(y as usize)).is_ok())
        .collect())
}

pub fn empirical_coverage(sets: &[PredictionSet], labels: &[u32]) -> Result<f64> {
    let hits = coverage_indicators(sets, labels)?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

pub fn average_set_size(sets: &[PredictionSet]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::domain("average set size of no sets"));
    }
    Ok(sets.iter().map(Vec::len).sum::<usize>() as f64 / sets.len() as f64)
}

/// Coverage of each class; `None` for classes without test samples.
pub fn per_class_coverage(sets: &[PredictionSet], labels: &[u32], class_count: usize) -> Result<Vec<Option<f64>>> {
    let hits = coverage_indicators(sets, labels)?;
    let mut counts = vec![(0usize, 0usize); class_count];
    for (&y, &h) in labels.iter().zip(&hits) {
        let slot = counts
            .get_mut(y as usize)
            .ok_or_else(|| Error::domain(format!("label {y} out of range for {class_count} classes")))?;
        slot.0 += h as usize;
        slot.1 += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(hit, n)| (n > 0).then(|| hit as f64 / n as f64))
        .collect())
}

/// Classes with no test samples; these are left out of the macro averages.
pub fn absent_classes(per_class: &[Option<f64>]) -> Vec<usize> {
    per_class
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(k, _)| k)
        .collect()
}

fn present(per_class: &[Option<f64>]) -> Vec<f64> {
    per_class.iter().flatten().copied().collect()
}

pub fn macro_coverage(sets: &[PredictionSet], labels: &[u32], class_count: usize) -> Result<f64> {
    let cov = present(&per_class_coverage(sets, labels, class_count)?);
    Ok(cov.iter().sum::<f64>() / cov.len() as f64)
}

/// Mean absolute deviation of per-class coverage from `1 - α`, in percent.
pub fn coverage_gap(sets: &[PredictionSet], labels: &[u32], class_count: usize, alpha: f64) -> Result<f64> {
    let cov = present(&per_class_coverage(sets, labels, class_count)?);
    let target = 1.0 - alpha;
    Ok(100.0 * cov.iter().map(|c| (c - target).abs()).sum::<f64>() / cov.len() as f64)
}

/// Largest `|coverage − (1 − α)|` over the nonempty set-size strata.
pub fn size_stratified_coverage_violation(
    sets: &[PredictionSet],
    labels: &[u32],
    strata: &SizeStrata,
    alpha: f64,
) -> Result<f64> {
    let hits = coverage_indicators(sets, labels)?;
    let mut worst: Option<f64> = None;
    for &(lo, hi) in strata.bins() {
        let (mut hit, mut n) = (0usize, 0usize);
        for (s, &h) in sets.iter().zip(&hits) {
            if (lo..=hi).contains(&s.len()) {
                hit += h as usize;
                n += 1;
            }
        }
        if n > 0 {
            let v = (hit as f64 / n as f64 - (1.0 - alpha)).abs();
            worst = Some(worst.map_or(v, |w: f64| w.max(v)));
        }
    }
    worst.ok_or_else(|| Error::domain("every set-size stratum is empty"))
}

pub fn size_histogram(sets: &[PredictionSet]) -> std::collections::BTreeMap<usize, usize> {
    let mut h = std::collections::BTreeMap::new();
    for s in sets {
        *h.entry(s.len()).or_insert(0) += 1;
    }
    h
}
