use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::conformal::{calibration_scores, set_from_scores, test_scores, CalibratedPredictor};
use crate::data::{empirical_priors, ClassPriors, load_dataset, split_dataset, LogitDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_sets, ood_desiderata_report, EvalOptions, EvalReport, OodReport, PredictionSet};
use crate::scores::{ScoreParams, ScoredSample};
use crate::stats::{mean, sample_sd, welch_test};
use crate::synth::{generate_ood, generate_synthetic};

use super::config::{ExperimentConfig, Variant};

/// `qhat` as a JSON number, or the string `"inf"` when it is `+∞`.
mod qhat_json {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(q: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if q.is_finite() {
            Repr::Number(*q).serialize(s)
        } else {
            Repr::Text("inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(q) => Ok(q),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad qhat `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub alpha: f64,
    pub variant: String,
    #[serde(with = "qhat_json")]
    pub qhat: f64,
    pub report: EvalReport,
    pub ood: Option<OodReport>,
    /// Excluded from the document so reports stay byte-identical.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// `None` for a single trial.
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            sd: sample_sd(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub alpha: f64,
    pub variant: String,
    pub trials: usize,
    pub metrics: BTreeMap<String, MeanSd>,
}

/// One-tailed Welch test on per-trial average set sizes,
/// `H1: mean size(variant) < mean size(baseline)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchRow {
    pub alpha: f64,
    pub variant: String,
    pub baseline: String,
    pub metric: String,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub aggregate: Vec<AggregateRow>,
    pub welch: Vec<WelchRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::domain(format!("unknown format `{other}`"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "seed",
    "alpha",
    "variant",
    "qhat",
    "coverage",
    "avg_size",
    "macro_cov",
    "cov_gap_percent",
    "sscv",
    "wsc",
];

/// In-distribution data and the optional OOD stream of an experiment.
pub struct ExperimentData {
    pub data: LogitDataset,
    pub ood: Option<LogitDataset>,
    /// Prevalence priors fixed for all splits; `None` means estimate them on
    /// each calibration split.
    pub priors: Option<ClassPriors>,
}

pub fn load_experiment_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let data = match &cfg.logits {
        Some(path) => load_dataset(path)?,
        None => generate_synthetic(&cfg.synth)?,
    };
    let ood = match (&cfg.ood_logits, cfg.ood_shrink) {
        (Some(path), _) => Some(load_dataset(path)?),
        (None, Some(shrink)) => {
            let ood_cfg = crate::synth::SynthConfig {
                seed: cfg.synth.seed.wrapping_add(1),
                ..cfg.synth.clone()
            };
            Some(generate_ood(&ood_cfg, shrink)?)
        }
        (None, None) => None,
    };
    if let Some(o) = &ood {
        if o.class_count() != data.class_count() {
            return Err(Error::domain("OOD logits have a different class count"));
        }
    }
    let priors = match (&cfg.priors, &cfg.logits) {
        (Some(p), _) => Some(p.clone()),
        (None, None) => Some(cfg.synth.priors.resolve(cfg.synth.class_count)?),
        (None, Some(_)) => None,
    };
    if let Some(p) = &priors {
        if p.len() != data.class_count() {
            return Err(Error::Length {
                expected: data.class_count(),
                found: p.len(),
            });
        }
    }
    Ok(ExperimentData { data, ood, priors })
}

fn true_label_scores(ds: &LogitDataset, scored: &[ScoredSample]) -> Vec<f64> {
    scored.iter().enumerate().map(|(i, s)| s.scores[ds.label(i)]).collect()
}

fn sets_for(scored: &[ScoredSample], qhat: f64) -> Vec<PredictionSet> {
    scored.iter().map(|s| set_from_scores(&s.scores, qhat)).collect()
}

/// Per-variant trial parameters for one calibration split.
pub(crate) fn trial_params(variant: &Variant, cal: &LogitDataset, fixed: Option<&ClassPriors>) -> Result<ScoreParams> {
    let priors = if !variant.prevalence {
        None
    } else if let Some(p) = fixed {
        Some(p.clone())
    } else {
        let emp = empirical_priors(cal);
        if !emp.absent_classes.is_empty() {
            return Err(Error::domain(format!(
                "prevalence adjustment: classes {:?} are absent from the calibration split",
                emp.absent_classes
            )));
        }
        Some(emp.priors)
    };
    let params = variant.params_with(priors);
    params.validate(cal.class_count())?;
    Ok(params)
}

fn run_trial(cfg: &ExperimentConfig, data: &ExperimentData, seed: u64) -> Result<Vec<TrialResult>> {
    let (cal, test) = split_dataset(
        &data.data,
        SplitSpec {
            calibration_fraction: cfg.split_fraction,
            seed,
        },
    )?;
    let opts = EvalOptions {
        wsc_delta: cfg.wsc_delta,
        wsc_directions: cfg.wsc_directions,
        wsc_seed: seed,
        sscv_strata: None,
        difficulty_table: cfg.difficulty_table,
        difficulty_bins: None,
    };
    // (alpha, variant) ordering within a seed
    let mut by_variant = Vec::new();
    for variant in cfg.variants() {
        let start = Instant::now();
        let params = trial_params(&variant, &cal, data.priors.as_ref())?;
        let cal_scored = calibration_scores(&cal, &params, seed)?;
        let true_scores = true_label_scores(&cal, &cal_scored);
        let test_scored = test_scores(&test, &params, seed)?;
        let ood_scored = match &data.ood {
            Some(o) => Some(test_scores(o, &params, seed)?),
            None => None,
        };
        let mut rows = Vec::new();
        for &alpha in &cfg.alphas {
            let pred = CalibratedPredictor::from_true_scores(&true_scores, params.clone(), alpha, seed, cal.class_count())?;
            let sets = sets_for(&test_scored, pred.qhat);
            let report = evaluate_sets(&test, &sets, alpha, params.softmax_temperature, params.energy_temperature, &opts)?;
            let ood = match &ood_scored {
                Some(o) => Some(ood_desiderata_report(&sets, &sets_for(o, pred.qhat), cfg.small_k)?),
                None => None,
            };
            rows.push(TrialResult {
                seed,
                alpha,
                variant: variant.name.clone(),
                qhat: pred.qhat,
                report,
                ood,
                wall_time_ms: 0.0,
            });
        }
        let elapsed = start.elapsed().as_secs_f64() * 1e3 / rows.len() as f64;
        rows.iter_mut().for_each(|r| r.wall_time_ms = elapsed);
        by_variant.push(rows);
    }
    let mut out = Vec::new();
    for a in 0..cfg.alphas.len() {
        for rows in &by_variant {
            out.push(rows[a].clone());
        }
    }
    Ok(out)
}

fn metric_values(r: &TrialResult) -> Vec<(&'static str, Option<f64>)> {
    vec![
        ("coverage", Some(r.report.coverage)),
        ("avg_size", Some(r.report.avg_size)),
        ("macro_cov", Some(r.report.macro_cov)),
        ("cov_gap_percent", Some(r.report.cov_gap_percent)),
        ("sscv", Some(r.report.sscv)),
        ("wsc", r.report.wsc),
        ("qhat", r.qhat.is_finite().then_some(r.qhat)),
    ]
}

/// Mean ± sample standard deviation per (alpha, variant) across trials.
pub fn aggregate(cfg: &ExperimentConfig, trials: &[TrialResult]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        for variant in cfg.variants() {
            let group: Vec<&TrialResult> = trials
                .iter()
                .filter(|t| t.alpha == alpha && t.variant == variant.name)
                .collect();
            if group.is_empty() {
                continue;
            }
            let mut metrics = BTreeMap::new();
            for (i, (name, _)) in metric_values(group[0]).iter().enumerate() {
                let xs: Vec<f64> = group.iter().filter_map(|t| metric_values(t)[i].1).collect();
                if xs.len() == group.len() {
                    metrics.insert(name.to_string(), MeanSd::of(&xs));
                }
            }
            rows.push(AggregateRow {
                alpha,
                variant: variant.name,
                trials: group.len(),
                metrics,
            });
        }
    }
    rows
}

fn welch_rows(cfg: &ExperimentConfig, trials: &[TrialResult]) -> Result<Vec<WelchRow>> {
    let variants = cfg.variants();
    if variants.len() < 2 || cfg.seeds.len() < 2 {
        return Ok(Vec::new());
    }
    let (base, main) = (&variants[0].name, &variants[1].name);
    let sizes = |alpha: f64, name: &str| -> Vec<f64> {
        trials
            .iter()
            .filter(|t| t.alpha == alpha && t.variant == name)
            .map(|t| t.report.avg_size)
            .collect()
    };
    cfg.alphas
        .iter()
        .map(|&alpha| {
            let w = welch_test(&sizes(alpha, main), &sizes(alpha, base))?;
            Ok(WelchRow {
                alpha,
                variant: main.clone(),
                baseline: base.clone(),
                metric: "avg_size".into(),
                t: w.t,
                df: w.df,
                p: w.p,
            })
        })
        .collect()
}

/// Split, calibrate, predict and evaluate once per seed, then aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = load_experiment_data(cfg)?;
    run_experiment_on(cfg, &data)
}

pub fn run_experiment_on(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<ExperimentReport> {
    let per_seed: Vec<Vec<TrialResult>> = cfg
        .seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            run_trial(cfg, data, seed).map_err(|e| Error::Trial {
                trial: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let trials: Vec<TrialResult> = per_seed.into_iter().flatten().collect();
    Ok(ExperimentReport {
        aggregate: aggregate(cfg, &trials),
        welch: welch_rows(cfg, &trials)?,
        config: cfg.clone(),
        trials,
    })
}

fn csv_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "inf".into()
    }
}

pub fn report_csv_string(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for t in &report.trials {
        let r = &t.report;
        w.write_record([
            t.seed.to_string(),
            csv_number(t.alpha),
            t.variant.clone(),
            csv_number(t.qhat),
            csv_number(r.coverage),
            csv_number(r.avg_size),
            csv_number(r.macro_cov),
            csv_number(r.cov_gap_percent),
            csv_number(r.sscv),
            r.wsc.map(csv_number).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn report_json_string(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report(report: &ExperimentReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report_json_string(report)?,
        ReportFormat::Csv => report_csv_string(report)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
