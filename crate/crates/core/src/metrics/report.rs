use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LogitDataset;
use crate::error::Result;

use super::*;

/// Which optional diagnostics to compute and with what settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// `None` disables worst-slab coverage.
    pub wsc_delta: Option<f64>,
    pub wsc_directions: usize,
    pub wsc_seed: u64,
    /// Defaults to [`SizeStrata::default_for`] when absent.
    pub sscv_strata: Option<SizeStrata>,
    pub difficulty_table: bool,
    pub difficulty_bins: Option<DifficultyBins>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            wsc_delta: Some(DEFAULT_WSC_DELTA),
            wsc_directions: DEFAULT_WSC_DIRECTIONS,
            wsc_seed: 0,
            sscv_strata: None,
            difficulty_table: true,
            difficulty_bins: None,
        }
    }
}

/// Settings that produced an [`EvalReport`], echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub alpha: f64,
    pub class_count: usize,
    pub test_size: usize,
    pub wsc_directions: usize,
    pub wsc_features: String,
    pub sscv_strata: Vec<(usize, usize)>,
    pub difficulty_bins: Vec<(usize, usize)>,
    pub excluded_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub coverage: f64,
    pub avg_size: f64,
    pub macro_cov: f64,
    pub cov_gap_percent: f64,
    pub sscv: f64,
    pub wsc: Option<f64>,
    pub wsc_delta: Option<f64>,
    pub per_class_coverage: Vec<Option<f64>>,
    pub size_histogram: BTreeMap<usize, usize>,
    pub difficulty_table: Option<Vec<DifficultyRow>>,
    pub config: MetricsConfig,
}

/// Compute every metric for the prediction sets of `test`. WSC uses the
/// logit vectors as features; the difficulty table ranks labels under the
/// given temperatures.
pub fn evaluate_sets(
    test: &LogitDataset,
    sets: &[PredictionSet],
    alpha: f64,
    softmax_temperature: f64,
    energy_temperature: f64,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let labels = test.labels();
    let k = test.class_count();
    let per_class = per_class_coverage(sets, labels, k)?;
    let strata = opts.sscv_strata.clone().unwrap_or_else(|| SizeStrata::default_for(k));
    let bins = opts.difficulty_bins.clone().unwrap_or_else(|| DifficultyBins::default_for(k));
    let wsc = match opts.wsc_delta {
        Some(delta) => Some(worst_slab_coverage(
            test.logits(),
            k,
            sets,
            labels,
            delta,
            opts.wsc_directions,
            opts.wsc_seed,
        )?),
        None => None,
    };
    let difficulty_table = if opts.difficulty_table {
        Some(stratified_report(test, softmax_temperature, energy_temperature, sets, &bins)?)
    } else {
        None
    };
    Ok(EvalReport {
        coverage: empirical_coverage(sets, labels)?,
        avg_size: average_set_size(sets)?,
        macro_cov: macro_coverage(sets, labels, k)?,
        cov_gap_percent: coverage_gap(sets, labels, k, alpha)?,
        sscv: size_stratified_coverage_violation(sets, labels, &strata, alpha)?,
        wsc,
        wsc_delta: opts.wsc_delta,
        size_histogram: size_histogram(sets),
        difficulty_table,
        config: MetricsConfig {
            alpha,
            class_count: k,
            test_size: test.len(),
            wsc_directions: opts.wsc_directions,
            wsc_features: "logits".into(),
            sscv_strata: strata.bins().to_vec(),
            difficulty_bins: bins.edges().to_vec(),
            excluded_classes: absent_classes(&per_class),
        },
        per_class_coverage: per_class,
    })
}
