//! Grid sweeps over α × T × τ × β, reported as long-form rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{calibration_scores, conformal_quantile, set_from_scores, test_scores};
use crate::data::{split_dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{average_set_size, empirical_coverage};
use crate::stats::mean;

use super::config::ExperimentConfig;
use super::experiment::{trial_params, ExperimentData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub softmax_temperatures: Vec<f64>,
    pub energy_temperatures: Vec<f64>,
    pub betas: Vec<f64>,
}

/// One grid cell, averaged over the configured seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub softmax_temperature: f64,
    #[serde(rename = "tau")]
    pub energy_temperature: f64,
    pub alpha: f64,
    pub beta: f64,
    pub variant: String,
    pub avg_size: f64,
    pub coverage: f64,
}

pub const SWEEP_COLUMNS: [&str; 7] = ["T", "tau", "alpha", "beta", "variant", "avg_size", "coverage"];

/// Evaluate every grid cell for the configured variants (plus the base
/// score). Rows are ordered by T, τ, β, α, variant.
pub fn run_sweep(cfg: &ExperimentConfig, data: &ExperimentData, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if grid.softmax_temperatures.is_empty() || grid.energy_temperatures.is_empty() || grid.betas.is_empty() {
        return Err(Error::domain("every sweep axis needs at least one value"));
    }
    let sweep_cfg = ExperimentConfig {
        compare_base: true,
        ..cfg.clone()
    };
    let variants = sweep_cfg.variants();
    let mut cells = Vec::new();
    for &t in &grid.softmax_temperatures {
        for &tau in &grid.energy_temperatures {
            for &beta in &grid.betas {
                cells.push((t, tau, beta));
            }
        }
    }
    let splits = cfg
        .seeds
        .iter()
        .map(|&seed| {
            split_dataset(
                &data.data,
                SplitSpec {
                    calibration_fraction: cfg.split_fraction,
                    seed,
                },
            )
            .map(|s| (seed, s))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(t, tau, beta)| {
            // metrics[variant][alpha] = (sizes, coverages) across seeds
            let mut acc = vec![vec![(Vec::new(), Vec::new()); cfg.alphas.len()]; variants.len()];
            for (seed, (cal, test)) in &splits {
                for (v, variant) in variants.iter().enumerate() {
                    let mut params = trial_params(variant, cal, data.priors.as_ref())?;
                    params.softmax_temperature = t;
                    params.energy_temperature = tau;
                    params.softplus_beta = beta;
                    let cal_scored = calibration_scores(cal, &params, *seed)?;
                    let true_scores: Vec<f64> = cal_scored
                        .iter()
                        .enumerate()
                        .map(|(i, s)| s.scores[cal.label(i)])
                        .collect();
                    let test_scored = test_scores(test, &params, *seed)?;
                    for (a, &alpha) in cfg.alphas.iter().enumerate() {
                        let q = conformal_quantile(&true_scores, alpha)?;
                        let sets: Vec<Vec<usize>> = test_scored.iter().map(|s| set_from_scores(&s.scores, q)).collect();
                        acc[v][a].0.push(average_set_size(&sets)?);
                        acc[v][a].1.push(empirical_coverage(&sets, test.labels())?);
                    }
                }
            }
            let mut rows = Vec::new();
            for (a, &alpha) in cfg.alphas.iter().enumerate() {
                for (v, variant) in variants.iter().enumerate() {
                    rows.push(SweepRow {
                        softmax_temperature: t,
                        energy_temperature: tau,
                        alpha,
                        beta,
                        variant: variant.name.clone(),
                        avg_size: mean(&acc[v][a].0),
                        coverage: mean(&acc[v][a].1),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// Per (α, variant): the row with the smallest average set size among those
/// whose coverage reaches `1 - α`. Ties keep the earliest row.
pub fn select_min_size_subject_to_coverage(rows: &[SweepRow]) -> Vec<SweepRow> {
    let mut picked: Vec<SweepRow> = Vec::new();
    for r in rows.iter().filter(|r| r.coverage >= 1.0 - r.alpha) {
        match picked.iter_mut().find(|p| p.alpha == r.alpha && p.variant == r.variant) {
            Some(p) if r.avg_size < p.avg_size => *p = r.clone(),
            Some(_) => {}
            None => picked.push(r.clone()),
        }
    }
    picked
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(SWEEP_COLUMNS)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
