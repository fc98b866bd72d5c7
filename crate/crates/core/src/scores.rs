//! Pointwise quantities computed from a logit row: tempered softmax, free
//! energy, entropy, label rank, the four base nonconformity scores and their
//! energy / entropy / prevalence modulations.
//!
//! All arithmetic is `f64`; every log-sum-exp subtracts the row maximum first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassPriors, LogitDataset};
use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseScore {
    Lac,
    Aps,
    Raps,
    Saps,
}

impl BaseScore {
    pub const ALL: [BaseScore; 4] = [BaseScore::Lac, BaseScore::Aps, BaseScore::Raps, BaseScore::Saps];

    pub fn is_adaptive(self) -> bool {
        !matches!(self, BaseScore::Lac)
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseScore::Lac => "lac",
            BaseScore::Aps => "aps",
            BaseScore::Raps => "raps",
            BaseScore::Saps => "saps",
        }
    }
}

impl std::str::FromStr for BaseScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lac" | "thr" => Ok(BaseScore::Lac),
            "aps" => Ok(BaseScore::Aps),
            "raps" => Ok(BaseScore::Raps),
            "saps" => Ok(BaseScore::Saps),
            other => Err(Error::domain(format!("unknown score `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    None,
    Energy,
    Entropy,
}

/// Which form of the LAC score is in use. The unmodulated baseline reports
/// `1 - π_y`; every modulated or prevalence-adjusted LAC uses `-π_y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LacForm {
    OneMinusProb,
    NegativeProb,
}

/// Source of the per-sample tie-breaking uniform `u`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum Randomization {
    #[default]
    Random,
    /// Debug only: use this constant for every sample (allowed in `[0, 1]`).
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub base: BaseScore,
    pub softmax_temperature: f64,
    pub energy_temperature: f64,
    pub softplus_beta: f64,
    pub raps_lambda: f64,
    pub raps_kreg: usize,
    pub saps_lambda: f64,
    pub modulation: Modulation,
    pub priors: Option<ClassPriors>,
    #[serde(default)]
    pub randomization: Randomization,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self {
            base: BaseScore::Aps,
            softmax_temperature: 1.0,
            energy_temperature: 1.0,
            softplus_beta: 1.0,
            raps_lambda: 0.2,
            raps_kreg: 2,
            saps_lambda: 0.2,
            modulation: Modulation::None,
            priors: None,
            randomization: Randomization::Random,
        }
    }
}

impl ScoreParams {
    pub fn new(base: BaseScore) -> Self {
        Self {
            base,
            ..Self::default()
        }
    }

    pub fn with_modulation(mut self, modulation: Modulation) -> Self {
        self.modulation = modulation;
        self
    }

    pub fn with_priors(mut self, priors: ClassPriors) -> Self {
        self.priors = Some(priors);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.softplus_beta = beta;
        self
    }

    pub fn lac_form(&self) -> LacForm {
        if self.modulation == Modulation::None && self.priors.is_none() {
            LacForm::OneMinusProb
        } else {
            LacForm::NegativeProb
        }
    }

    /// Short human-readable variant name, e.g. `energy-aps` or `pa-raps`.
    pub fn variant_name(&self) -> String {
        let mut name = String::new();
        match self.modulation {
            Modulation::None => {}
            Modulation::Energy => name.push_str("energy-"),
            Modulation::Entropy => name.push_str("entropy-"),
        }
        if self.priors.is_some() {
            name.push_str(if self.base == BaseScore::Lac { "pas-" } else { "pa-" });
        }
        name.push_str(self.base.name());
        name
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("softmax temperature", self.softmax_temperature)?;
        positive("energy temperature", self.energy_temperature)?;
        positive("softplus beta", self.softplus_beta)?;
        if !(self.raps_lambda >= 0.0 && self.raps_lambda.is_finite()) {
            return Err(Error::domain(format!("RAPS lambda must be >= 0, got {}", self.raps_lambda)));
        }
        if self.raps_kreg == 0 {
            return Err(Error::domain("RAPS k_reg must be a positive integer"));
        }
        if self.base == BaseScore::Saps {
            positive("SAPS lambda", self.saps_lambda)?;
        }
        if let Randomization::Fixed(u) = self.randomization {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::domain(format!("fixed u must lie in [0, 1], got {u}")));
            }
        }
        if let Some(p) = &self.priors {
            if p.len() != class_count {
                return Err(Error::domain(format!(
                    "priors have {} classes, dataset has {class_count}",
                    p.len()
                )));
            }
            if let Some(&k) = p.zero_classes().first() {
                return Err(Error::domain(format!(
                    "prevalence adjustment needs a positive prior for every class; class {k} has prior 0"
                )));
            }
        }
        Ok(())
    }
}

/// Scores of every candidate label for one sample plus the per-sample terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub scores: Vec<f64>,
    pub free_energy: f64,
    pub entropy: f64,
    pub u: f64,
}

fn check_temperature(name: &str, t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {t}")))
    }
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `log Σ exp(f_k / t)` with max-subtraction.
fn log_sum_exp(row: &[f64], t: f64) -> f64 {
    let m = row_max(row);
    let s: f64 = row.iter().map(|&f| ((f - m) / t).exp()).sum();
    m / t + s.ln()
}

pub fn softmax_with_temperature(row: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature("softmax temperature", temperature)?;
    let m = row_max(row);
    let mut out: Vec<f64> = row.iter().map(|&f| ((f - m) / temperature).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    Ok(out)
}

/// Helmholtz free energy `F = -τ log Σ exp(f_k / τ)`.
pub fn free_energy(row: &[f64], tau: f64) -> Result<f64> {
    check_temperature("energy temperature", tau)?;
    Ok(-tau * log_sum_exp(row, tau))
}

/// `(1/β) log(1 + exp(-β F))`, floored at the smallest positive normal
/// double so that it stays strictly positive.
pub fn softplus_scale(free_energy: f64, beta: f64) -> f64 {
    let z = -beta * free_energy;
    let g = (z.max(0.0) + (-z.abs()).exp().ln_1p()) / beta;
    g.max(f64::MIN_POSITIVE)
}

/// Shannon entropy with `0 log 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}

/// Entropy of the tempered softmax computed from log-probabilities.
fn entropy_from_logits(row: &[f64], temperature: f64, probs: &[f64]) -> f64 {
    let lse = log_sum_exp(row, temperature);
    let h: f64 = row
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&f, &p)| -p * (f / temperature - lse))
        .sum();
    h.max(0.0)
}

/// `|{k : π_k >= π_y}|`; tied labels share a rank.
pub fn label_rank(probs: &[f64], y: usize) -> Result<usize> {
    let py = *probs
        .get(y)
        .ok_or_else(|| Error::domain(format!("label {y} out of range for {} classes", probs.len())))?;
    Ok(probs.iter().filter(|&&p| p >= py).count())
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::domain(format!("u must lie in [0, 1), got {u}")))
    }
}

#[inline]
fn base_from_parts(params: &ScoreParams, py: f64, greater: f64, rank: usize, p_max: f64, u: f64) -> f64 {
    match params.base {
        BaseScore::Lac => match params.lac_form() {
            LacForm::OneMinusProb => 1.0 - py,
            LacForm::NegativeProb => -py,
        },
        BaseScore::Aps => greater + u * py,
        BaseScore::Raps => {
            let over = rank.saturating_sub(params.raps_kreg) as f64;
            greater + u * py + params.raps_lambda * over
        }
        BaseScore::Saps => {
            if rank == 1 {
                u * p_max
            } else {
                p_max + (rank as f64 - 2.0 + u) * params.saps_lambda
            }
        }
    }
}

/// Base score of a single label, evaluated directly from the definitions.
pub fn base_score(probs: &[f64], y: usize, u: f64, params: &ScoreParams) -> Result<f64> {
    check_u(u)?;
    let rank = label_rank(probs, y)?;
    let py = probs[y];
    let greater: f64 = probs.iter().filter(|&&p| p > py).sum();
    let p_max = row_max(probs);
    Ok(base_from_parts(params, py, greater, rank, p_max, u))
}

/// Apply the energy or entropy modulation to a base score.
pub fn modulated_score(
    s: f64,
    kind: BaseScore,
    free_energy: f64,
    entropy: f64,
    params: &ScoreParams,
) -> Result<f64> {
    match params.modulation {
        Modulation::None => Err(Error::domain("modulated_score requires a modulation")),
        Modulation::Energy => {
            let g = softplus_scale(free_energy, params.softplus_beta);
            Ok(apply_energy(s, kind, g))
        }
        Modulation::Entropy => apply_entropy(s, kind, entropy),
    }
}

#[inline]
fn apply_energy(s: f64, kind: BaseScore, g: f64) -> f64 {
    if kind.is_adaptive() {
        s * g
    } else {
        s / g
    }
}

#[inline]
fn apply_entropy(s: f64, kind: BaseScore, entropy: f64) -> Result<f64> {
    if kind.is_adaptive() {
        if entropy <= 0.0 {
            return Err(Error::Degenerate(
                "entropy-modulated adaptive score is undefined for a one-hot softmax (entropy = 0)".into(),
            ));
        }
        Ok(s / entropy)
    } else {
        Ok(s * entropy)
    }
}

/// Prevalence adjustment: LAC (PAS) divides `-π_y` by the prior, adaptive
/// scores (PA) are multiplied by it.
pub fn prevalence_adjusted_score(s: f64, y: usize, priors: &ClassPriors, kind: BaseScore) -> Result<f64> {
    if y >= priors.len() {
        return Err(Error::domain(format!("label {y} out of range for priors")));
    }
    let p = priors.get(y);
    if p <= 0.0 {
        return Err(Error::domain(format!("class {y} has prior 0")));
    }
    Ok(if kind.is_adaptive() { s * p } else { s / p })
}

/// Per-row terms shared by every label.
struct RowTerms {
    probs: Vec<f64>,
    free_energy: f64,
    entropy: f64,
}

fn row_terms(row: &[f64], params: &ScoreParams) -> Result<RowTerms> {
    let probs = softmax_with_temperature(row, params.softmax_temperature)?;
    let free_energy = free_energy(row, params.energy_temperature)?;
    let entropy = entropy_from_logits(row, params.softmax_temperature, &probs);
    Ok(RowTerms {
        probs,
        free_energy,
        entropy,
    })
}

/// Unmodulated scores of all labels, using the LAC form implied by `params`.
/// Sorting once makes this `O(K log K)` for the whole row.
fn base_scores_from_probs(probs: &[f64], u: f64, params: &ScoreParams) -> Vec<f64> {
    let k = probs.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let p_max = probs[order[0]];

    let mut out = vec![0.0; k];
    let mut greater = 0.0;
    let mut i = 0;
    while i < k {
        let p = probs[order[i]];
        let mut j = i;
        while j < k && probs[order[j]] == p {
            j += 1;
        }
        // every label in order[i..j] has rank j
        for &label in &order[i..j] {
            out[label] = base_from_parts(params, p, greater, j, p_max, u);
        }
        for &label in &order[i..j] {
            greater += probs[label];
        }
        i = j;
    }
    out
}

/// Unmodulated base scores of every label of `row`.
pub fn base_scores(row: &[f64], params: &ScoreParams, u: f64) -> Result<Vec<f64>> {
    check_u(u)?;
    let probs = softmax_with_temperature(row, params.softmax_temperature)?;
    Ok(base_scores_from_probs(&probs, u, params))
}

/// Energy scale `G(x)` of a row under `params`.
pub fn energy_scale(row: &[f64], params: &ScoreParams) -> Result<f64> {
    Ok(softplus_scale(
        free_energy(row, params.energy_temperature)?,
        params.softplus_beta,
    ))
}

/// Fully configured scores (base, modulation, prevalence) of every label.
pub fn score_row(row: &[f64], params: &ScoreParams, u: f64) -> Result<ScoredSample> {
    check_u(u)?;
    let terms = row_terms(row, params)?;
    let mut scores = base_scores_from_probs(&terms.probs, u, params);
    let kind = params.base;
    match params.modulation {
        Modulation::None => {}
        Modulation::Energy => {
            let g = softplus_scale(terms.free_energy, params.softplus_beta);
            scores.iter_mut().for_each(|s| *s = apply_energy(*s, kind, g));
        }
        Modulation::Entropy => {
            for s in scores.iter_mut() {
                *s = apply_entropy(*s, kind, terms.entropy)?;
            }
        }
    }
    if let Some(priors) = &params.priors {
        for (y, s) in scores.iter_mut().enumerate() {
            *s = prevalence_adjusted_score(*s, y, priors, kind)?;
        }
    }
    Ok(ScoredSample {
        scores,
        free_energy: terms.free_energy,
        entropy: terms.entropy,
        u,
    })
}

/// The `u` of sample `index` under `params`' randomization.
pub fn draw_u(params: &ScoreParams, rng: CounterRng, index: usize) -> f64 {
    match params.randomization {
        Randomization::Random => rng.uniform(index as u64, 0),
        Randomization::Fixed(u) => u,
    }
}

/// Score every sample of `ds`; `u` comes from `(seed, sample index)`.
pub fn score_all(ds: &LogitDataset, params: &ScoreParams, seed: u64) -> Result<Vec<ScoredSample>> {
    score_all_with(ds, params, CounterRng::new(seed, streams::SCORE_U))
}

/// As [`score_all`] with an explicit `u` stream. Output does not depend on
/// how rayon schedules the rows.
pub fn score_all_with(ds: &LogitDataset, params: &ScoreParams, rng: CounterRng) -> Result<Vec<ScoredSample>> {
    params.validate(ds.class_count())?;
    (0..ds.len())
        .into_par_iter()
        .map(|i| score_row(ds.row(i), params, draw_u(params, rng, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PROBS: [f64; 3] = [0.6, 0.3, 0.1];

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_with_temperature(&[0.0, 0.0], 1.0).unwrap(), vec![0.5, 0.5]);
        let p = softmax_with_temperature(&[1.0, 2.0, 3.0], 1.0).unwrap();
        for (a, b) in p.iter().zip([0.09003, 0.24473, 0.66524]) {
            assert!(close(*a, b, 1e-5), "{a} vs {b}");
        }
        assert_eq!(
            softmax_with_temperature(&[2.0, 4.0], 2.0).unwrap(),
            softmax_with_temperature(&[1.0, 2.0], 1.0).unwrap()
        );
        assert!(softmax_with_temperature(&[1.0, 2.0], 0.0).is_err());
        assert!(softmax_with_temperature(&[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn free_energy_examples() {
        assert!(close(free_energy(&[0.0, 0.0], 1.0).unwrap(), -std::f64::consts::LN_2, 1e-12));
        assert!(close(free_energy(&[1.0, 2.0, 3.0], 1.0).unwrap(), -3.40761, 1e-5));
        assert!(close(free_energy(&[0.0, 0.0], 2.0).unwrap(), -2.0 * std::f64::consts::LN_2, 1e-12));
        assert!(free_energy(&[0.0], 0.0).is_err());
    }

    #[test]
    fn softplus_examples() {
        assert!(close(softplus_scale(0.0, 1.0), std::f64::consts::LN_2, 1e-15));
        assert!(close(softplus_scale(-10.0, 1.0), 10.0000454, 1e-6));
        let g = softplus_scale(10.0, 1.0);
        assert!(close(g, 4.5399e-5, 1e-9) && g > 0.0);
        assert!(softplus_scale(1e6, 1.0) > 0.0);
    }

    #[test]
    fn entropy_examples() {
        assert!(close(shannon_entropy(&[0.5, 0.5]), std::f64::consts::LN_2, 1e-15));
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0]), 0.0);
        assert!(close(shannon_entropy(&[0.25; 4]), 4f64.ln(), 1e-15));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(label_rank(&PROBS, 0).unwrap(), 1);
        assert_eq!(label_rank(&PROBS, 2).unwrap(), 3);
        assert_eq!(label_rank(&[0.4, 0.4, 0.2], 1).unwrap(), 2);
        assert!(label_rank(&PROBS, 3).is_err());
    }

    #[test]
    fn base_score_examples() {
        let lac = ScoreParams::new(BaseScore::Lac);
        assert!(close(base_score(&PROBS, 0, 0.5, &lac).unwrap(), 0.4, 1e-15));
        let aps = ScoreParams::new(BaseScore::Aps);
        assert!(close(base_score(&PROBS, 1, 0.5, &aps).unwrap(), 0.75, 1e-15));
        let raps = ScoreParams::new(BaseScore::Raps);
        assert!(close(base_score(&PROBS, 2, 0.5, &raps).unwrap(), 1.15, 1e-12));
        let saps = ScoreParams::new(BaseScore::Saps);
        assert!(close(base_score(&PROBS, 2, 0.5, &saps).unwrap(), 0.9, 1e-12));
        assert!(base_score(&PROBS, 0, 1.5, &aps).is_err());
        assert!(base_score(&PROBS, 0, -0.1, &aps).is_err());
    }

    #[test]
    fn lac_uses_negative_form_when_modulated() {
        let p = ScoreParams::new(BaseScore::Lac).with_modulation(Modulation::Energy);
        assert_eq!(p.lac_form(), LacForm::NegativeProb);
        assert_eq!(base_score(&PROBS, 0, 0.0, &p).unwrap(), -0.6);
        let p = ScoreParams::new(BaseScore::Lac).with_priors(ClassPriors::uniform(3));
        assert_eq!(p.lac_form(), LacForm::NegativeProb);
    }

    #[test]
    fn modulated_examples() {
        let f = -3.40761;
        let energy = ScoreParams::new(BaseScore::Aps).with_modulation(Modulation::Energy);
        let s = modulated_score(0.75, BaseScore::Aps, f, 0.0, &energy).unwrap();
        assert!(close(s, 2.58010, 1e-4), "{s}");
        let s = modulated_score(-0.6, BaseScore::Lac, f, 0.0, &energy).unwrap();
        assert!(close(s, -0.17441, 1e-5), "{s}");
        let fixed = -(std::f64::consts::E - 1.0).ln();
        let s = modulated_score(0.37, BaseScore::Aps, fixed, 0.0, &energy).unwrap();
        assert!(close(s, 0.37, 1e-15));
    }

    #[test]
    fn entropy_modulation_rules() {
        let p = ScoreParams::new(BaseScore::Aps).with_modulation(Modulation::Entropy);
        assert!((modulated_score(0.5, BaseScore::Aps, 0.0, 0.25, &p).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            modulated_score(0.5, BaseScore::Aps, 0.0, 0.0, &p),
            Err(Error::Degenerate(_))
        ));
        assert_eq!(modulated_score(-0.5, BaseScore::Lac, 0.0, 0.0, &p).unwrap(), -0.0);
        assert!(modulated_score(0.5, BaseScore::Aps, 0.0, 0.5, &ScoreParams::default()).is_err());
    }

    #[test]
    fn entropy_mode_rejects_one_hot_rows() {
        let p = ScoreParams::new(BaseScore::Aps).with_modulation(Modulation::Entropy);
        assert!(matches!(score_row(&[0.0, 2000.0], &p, 0.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn prevalence_examples() {
        let priors = ClassPriors::new(vec![0.2, 0.8]).unwrap();
        assert!(close(prevalence_adjusted_score(-0.6, 0, &priors, BaseScore::Lac).unwrap(), -3.0, 1e-12));
        assert!(close(prevalence_adjusted_score(0.75, 0, &priors, BaseScore::Aps).unwrap(), 0.15, 1e-12));
        let zero = ClassPriors::new(vec![0.0, 1.0]).unwrap();
        assert!(prevalence_adjusted_score(0.75, 0, &zero, BaseScore::Aps).is_err());
        let p = ScoreParams::new(BaseScore::Aps).with_priors(zero);
        assert!(p.validate(2).is_err());
    }

    #[test]
    fn score_all_compositions() {
        let ds = LogitDataset::from_rows(3, &[(1, vec![0.3, -1.0, 2.0])]).unwrap();
        let lac = ScoreParams::new(BaseScore::Lac);
        let out = score_all(&ds, &lac, 4).unwrap();
        let probs = softmax_with_temperature(ds.row(0), 1.0).unwrap();
        for (s, p) in out[0].scores.iter().zip(&probs) {
            assert_eq!(*s, 1.0 - p);
        }
        assert_eq!(out, score_all(&ds, &lac, 4).unwrap());

        let ds = LogitDataset::new(4, vec![0; 50], (0..200).map(|i| ((i * 37) % 11) as f64 * 0.3).collect())
            .unwrap();
        let mut aps = ScoreParams::new(BaseScore::Aps);
        aps.randomization = Randomization::Fixed(0.0);
        for (i, s) in score_all(&ds, &aps, 1).unwrap().iter().enumerate() {
            let probs = softmax_with_temperature(ds.row(i), 1.0).unwrap();
            let top = (0..4).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
            if label_rank(&probs, top).unwrap() == 1 {
                assert_eq!(s.scores[top], 0.0);
            }
        }
    }

    fn row_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-20.0f64..20.0, k)
    }

    proptest! {
        #[test]
        fn sorted_path_matches_direct_formula(row in row_strategy(6), u in 0.0f64..1.0, kind in 0usize..4) {
            let params = ScoreParams::new(BaseScore::ALL[kind]);
            let probs = softmax_with_temperature(&row, 1.0).unwrap();
            let fast = base_scores(&row, &params, u).unwrap();
            for y in 0..row.len() {
                let direct = base_score(&probs, y, u, &params).unwrap();
                prop_assert!((fast[y] - direct).abs() < 1e-12, "{} vs {}", fast[y], direct);
            }
        }

        #[test]
        fn softmax_shift_invariant(row in row_strategy(5), c in -50.0f64..50.0, t in 0.1f64..5.0) {
            let a = softmax_with_temperature(&row, t).unwrap();
            let shifted: Vec<f64> = row.iter().map(|v| v + c).collect();
            let b = softmax_with_temperature(&shifted, t).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn lse_bounds(row in row_strategy(7), tau in 0.1f64..5.0) {
            let neg_f = -free_energy(&row, tau).unwrap();
            let m = row_max(&row);
            prop_assert!(m <= neg_f + 1e-9);
            prop_assert!(neg_f <= m + tau * (row.len() as f64).ln() + 1e-9);
        }

        #[test]
        fn softplus_positive_decreasing(f in -100.0f64..100.0, d in 0.01f64..10.0, beta in 0.1f64..100.0) {
            let a = softplus_scale(f, beta);
            let b = softplus_scale(f + d, beta);
            prop_assert!(a > 0.0 && b > 0.0);
            prop_assert!(b <= a);
        }

        #[test]
        fn softplus_relu_asymptote(neg_f in 30.0f64..1e4) {
            prop_assert!((softplus_scale(-neg_f, 1.0) - neg_f).abs() < 1e-9);
        }

        #[test]
        fn rank_independent_of_temperature(row in row_strategy(6), t in 0.05f64..20.0, y in 0usize..6) {
            let a = label_rank(&softmax_with_temperature(&row, 1.0).unwrap(), y).unwrap();
            let b = label_rank(&softmax_with_temperature(&row, t).unwrap(), y).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn energy_preserves_label_order(row in row_strategy(6), u in 0.0f64..1.0, kind in 0usize..4) {
            let base = ScoreParams::new(BaseScore::ALL[kind]).with_modulation(Modulation::Energy);
            let unmod = base_scores(&row, &base, u).unwrap();
            let modded = score_row(&row, &base, u).unwrap().scores;
            for a in 0..6 {
                for b in 0..6 {
                    if unmod[a] < unmod[b] {
                        prop_assert!(modded[a] <= modded[b]);
                    }
                }
            }
        }

        #[test]
        fn aps_top_label_below_max(row in row_strategy(5), u in 0.0f64..1.0) {
            let params = ScoreParams::new(BaseScore::Aps);
            let probs = softmax_with_temperature(&row, 1.0).unwrap();
            let top = (0..5).max_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(b.cmp(&a))).unwrap();
            let p_max = probs[top];
            prop_assume!(label_rank(&probs, top).unwrap() == 1);
            prop_assert!(base_score(&probs, top, u, &params).unwrap() < p_max || p_max == 0.0);
            let last = (0..5).min_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
            prop_assume!(probs.iter().filter(|&&p| p == probs[last]).count() == 1);
            let full = base_score(&probs, last, 1.0, &params).unwrap();
            prop_assert!((full - 1.0).abs() < 1e-12);
        }

        #[test]
        fn beta_plateau_at_score_level(s in 0.01f64..2.0, neg_f in 1.0f64..50.0) {
            let vals: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
                .iter()
                .map(|&b| s * softplus_scale(-neg_f, b))
                .collect();
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert!((hi - lo) / lo < 0.32);
        }
    }
}
