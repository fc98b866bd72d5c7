//! Split-conformal calibration and prediction sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LogitDataset;
use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};
use crate::scores::{draw_u, energy_scale, score_row, Modulation, ScoreParams, ScoredSample};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `⌈(n+1)(1-α)⌉`. Products within 1e-9 (relative) of an integer are taken
/// as that integer so that e.g. `10 * 0.9` gives 9 rather than 10.
pub fn quantile_rank(n: usize, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    let x = (n as f64 + 1.0) * (1.0 - alpha);
    let r = x.round();
    let m = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    Ok(m as usize)
}

/// The `⌈(n+1)(1-α)⌉`-th smallest score, or `+∞` if that index exceeds `n`.
pub fn conformal_quantile(true_scores: &[f64], alpha: f64) -> Result<f64> {
    if true_scores.is_empty() {
        return Err(Error::domain("conformal quantile of an empty score set"));
    }
    if let Some(s) = true_scores.iter().find(|s| s.is_nan()) {
        return Err(Error::domain(format!("calibration score is {s}")));
    }
    let n = true_scores.len();
    let m = quantile_rank(n, alpha)?;
    if m > n {
        return Ok(f64::INFINITY);
    }
    let mut buf = true_scores.to_vec();
    let (_, nth, _) = buf.select_nth_unstable_by(m.max(1) - 1, f64::total_cmp);
    Ok(*nth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedPredictor {
    pub params: ScoreParams,
    pub alpha: f64,
    pub qhat: f64,
    pub calibration_size: usize,
    pub seed: u64,
    pub class_count: usize,
}

/// Labels with score `<= qhat`, in increasing order.
pub fn set_from_scores(scores: &[f64], qhat: f64) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= qhat)
        .map(|(k, _)| k)
        .collect()
}

/// Scores of every calibration sample; `u` drawn from the calibration stream.
pub fn calibration_scores(cal: &LogitDataset, params: &ScoreParams, seed: u64) -> Result<Vec<ScoredSample>> {
    crate::scores::score_all_with(cal, params, CounterRng::new(seed, streams::CALIBRATION_U))
}

/// Scores of every test sample; `u` drawn from the test stream.
pub fn test_scores(test: &LogitDataset, params: &ScoreParams, seed: u64) -> Result<Vec<ScoredSample>> {
    crate::scores::score_all_with(test, params, CounterRng::new(seed, streams::TEST_U))
}

pub fn calibrate(cal: &LogitDataset, params: &ScoreParams, alpha: f64, seed: u64) -> Result<CalibratedPredictor> {
    check_alpha(alpha)?;
    let scored = calibration_scores(cal, params, seed)?;
    let true_scores: Vec<f64> = scored
        .iter()
        .enumerate()
        .map(|(i, s)| s.scores[cal.label(i)])
        .collect();
    CalibratedPredictor::from_true_scores(&true_scores, params.clone(), alpha, seed, cal.class_count())
}

impl CalibratedPredictor {
    /// Build a predictor from already computed true-label calibration scores.
    pub fn from_true_scores(
        true_scores: &[f64],
        params: ScoreParams,
        alpha: f64,
        seed: u64,
        class_count: usize,
    ) -> Result<Self> {
        params.validate(class_count)?;
        let qhat = conformal_quantile(true_scores, alpha)?;
        Ok(Self {
            params,
            alpha,
            qhat,
            calibration_size: true_scores.len(),
            seed,
            class_count,
        })
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.class_count {
            return Err(Error::domain(format!(
                "row has {} logits, predictor was calibrated on {} classes",
                row.len(),
                self.class_count
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("logit row contains a non-finite value"));
        }
        Ok(())
    }

    pub fn prediction_set(&self, row: &[f64], u: f64) -> Result<Vec<usize>> {
        self.check_row(row)?;
        if self.qhat == f64::INFINITY {
            return Ok((0..self.class_count).collect());
        }
        let scored = score_row(row, &self.params, u)?;
        Ok(set_from_scores(&scored.scores, self.qhat))
    }

    /// Per-sample threshold on the unmodulated score: `qhat / G(x)` for
    /// adaptive scores, `qhat * G(x)` for LAC.
    pub fn sample_threshold(&self, row: &[f64]) -> Result<f64> {
        if self.params.modulation != Modulation::Energy {
            return Err(Error::domain("sample threshold is defined for energy modulation only"));
        }
        if self.params.priors.is_some() {
            return Err(Error::domain("sample threshold is not defined with prevalence adjustment"));
        }
        if !self.qhat.is_finite() {
            return Err(Error::domain("sample threshold needs a finite qhat"));
        }
        self.check_row(row)?;
        let g = energy_scale(row, &self.params)?;
        Ok(if self.params.base.is_adaptive() {
            self.qhat / g
        } else {
            self.qhat * g
        })
    }

    pub fn predict_batch(&self, test: &LogitDataset) -> Result<Vec<Vec<usize>>> {
        if test.class_count() != self.class_count {
            return Err(Error::domain(format!(
                "test set has {} classes, predictor has {}",
                test.class_count(),
                self.class_count
            )));
        }
        let rng = CounterRng::new(self.seed, streams::TEST_U);
        (0..test.len())
            .into_par_iter()
            .map(|i| self.prediction_set(test.row(i), draw_u(&self.params, rng, i)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PredictorDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PredictorDoc = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct PredictorDoc {
    #[serde(flatten)]
    params: ScoreParams,
    alpha: f64,
    /// Bits of `qhat` as 16 hex digits; keeps `+inf` and every last bit.
    qhat: String,
    calibration_size: usize,
    seed: u64,
    class_count: usize,
}

impl From<&CalibratedPredictor> for PredictorDoc {
    fn from(p: &CalibratedPredictor) -> Self {
        Self {
            params: p.params.clone(),
            alpha: p.alpha,
            qhat: format!("0x{:016x}", p.qhat.to_bits()),
            calibration_size: p.calibration_size,
            seed: p.seed,
            class_count: p.class_count,
        }
    }
}

impl TryFrom<PredictorDoc> for CalibratedPredictor {
    type Error = Error;

    fn try_from(doc: PredictorDoc) -> Result<Self> {
        let hex = doc.qhat.trim_start_matches("0x");
        let bits = u64::from_str_radix(hex, 16)
            .map_err(|e| Error::Format(format!("bad qhat `{}`: {e}", doc.qhat)))?;
        let qhat = f64::from_bits(bits);
        if qhat.is_nan() {
            return Err(Error::Format("qhat is NaN".into()));
        }
        check_alpha(doc.alpha)?;
        if doc.calibration_size == 0 {
            return Err(Error::Format("calibration_size must be positive".into()));
        }
        doc.params.validate(doc.class_count)?;
        Ok(Self {
            params: doc.params,
            alpha: doc.alpha,
            qhat,
            calibration_size: doc.calibration_size,
            seed: doc.seed,
            class_count: doc.class_count,
        })
    }
}
