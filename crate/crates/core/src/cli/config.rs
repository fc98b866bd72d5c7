use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::ClassPriors;
use crate::error::{Error, Result};
use crate::metrics::{DEFAULT_WSC_DELTA, DEFAULT_WSC_DIRECTIONS};
use crate::scores::{BaseScore, Modulation, Randomization, ScoreParams};
use crate::synth::SynthConfig;

/// Fully resolved experiment settings. Every field has a default, so a JSON
/// config file may set any subset of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Logit file; when absent the synthetic generator is used.
    pub logits: Option<PathBuf>,
    pub ood_logits: Option<PathBuf>,
    pub synth: SynthConfig,
    /// Synthetic OOD stream: the generator with seed `synth.seed + 1`,
    /// logits multiplied by this factor.
    pub ood_shrink: Option<f64>,
    pub score: BaseScore,
    pub modulation: Modulation,
    pub prevalence: bool,
    /// Class prevalence used by the adjustment, e.g. training-set frequencies.
    /// Defaults to the generator priors for synthetic data; otherwise the
    /// priors are estimated on each calibration split.
    pub priors: Option<ClassPriors>,
    pub softmax_temperature: f64,
    pub energy_temperature: f64,
    pub softplus_beta: f64,
    pub raps_lambda: f64,
    pub raps_kreg: usize,
    pub saps_lambda: f64,
    /// Debug only: constant tie-breaking `u` instead of random draws.
    pub fixed_u: Option<f64>,
    /// Also run the unmodulated base score on the same splits and test
    /// whether the configured variant yields smaller sets.
    pub compare_base: bool,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub split_fraction: f64,
    /// `None` disables worst-slab coverage.
    pub wsc_delta: Option<f64>,
    pub wsc_directions: usize,
    pub difficulty_table: bool,
    /// OOD report counts sets with `1 <= |C| <= small_k` as falsely confident.
    pub small_k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = ScoreParams::default();
        Self {
            logits: None,
            ood_logits: None,
            synth: SynthConfig::default(),
            ood_shrink: None,
            score: p.base,
            modulation: Modulation::None,
            prevalence: false,
            priors: None,
            softmax_temperature: p.softmax_temperature,
            energy_temperature: p.energy_temperature,
            softplus_beta: p.softplus_beta,
            raps_lambda: p.raps_lambda,
            raps_kreg: p.raps_kreg,
            saps_lambda: p.saps_lambda,
            fixed_u: None,
            compare_base: false,
            alphas: vec![0.1],
            seeds: (0..10).collect(),
            split_fraction: 0.5,
            wsc_delta: Some(DEFAULT_WSC_DELTA),
            wsc_directions: DEFAULT_WSC_DIRECTIONS,
            difficulty_table: true,
            small_k: 1,
        }
    }
}

/// A score variant evaluated by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub params: ScoreParams,
    pub prevalence: bool,
}

impl Variant {
    /// Parameters for one trial; prevalence priors come from the calibration split.
    pub fn params_with(&self, priors: Option<ClassPriors>) -> ScoreParams {
        let mut p = self.params.clone();
        if self.prevalence {
            p.priors = priors;
        }
        p
    }
}

impl ExperimentConfig {
    pub fn score_params(&self) -> ScoreParams {
        ScoreParams {
            base: self.score,
            softmax_temperature: self.softmax_temperature,
            energy_temperature: self.energy_temperature,
            softplus_beta: self.softplus_beta,
            raps_lambda: self.raps_lambda,
            raps_kreg: self.raps_kreg,
            saps_lambda: self.saps_lambda,
            modulation: self.modulation,
            priors: None,
            randomization: match self.fixed_u {
                Some(u) => Randomization::Fixed(u),
                None => Randomization::Random,
            },
        }
    }

    fn variant_name(params: &ScoreParams, prevalence: bool) -> String {
        let mut p = params.clone();
        if prevalence {
            p.priors = Some(ClassPriors::uniform(2));
        }
        p.variant_name()
    }

    /// The configured variant, preceded by its unmodulated base when
    /// `compare_base` is set.
    pub fn variants(&self) -> Vec<Variant> {
        let params = self.score_params();
        let main = Variant {
            name: Self::variant_name(&params, self.prevalence),
            params: params.clone(),
            prevalence: self.prevalence,
        };
        let is_base = self.modulation == Modulation::None && !self.prevalence;
        if self.compare_base && !is_base {
            let base = ScoreParams {
                modulation: Modulation::None,
                ..params
            };
            vec![
                Variant {
                    name: Self::variant_name(&base, false),
                    params: base,
                    prevalence: false,
                },
                main,
            ]
        } else {
            vec![main]
        }
    }

    /// Range and consistency checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::domain("at least one alpha is required"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {a}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::domain("at least one seed is required"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::domain(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if let Some(d) = self.wsc_delta {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::domain(format!("WSC delta must lie in (0, 1], got {d}")));
            }
        }
        if let Some(s) = self.ood_shrink {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::domain(format!("OOD shrink must lie in (0, 1], got {s}")));
            }
        }
        if self.ood_shrink.is_some() && self.ood_logits.is_some() {
            return Err(Error::domain("give either an OOD logit file or a synthetic OOD shrink, not both"));
        }
        if self.ood_shrink.is_some() && self.logits.is_some() {
            return Err(Error::domain("a synthetic OOD stream needs synthetic in-distribution data"));
        }
        self.score_params().validate(2)?;
        if self.logits.is_none() {
            self.synth.validate()?;
        }
        Ok(())
    }
}

/// Parse `a..b` (inclusive), a comma list, or a single integer.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::domain(format!("cannot parse seeds `{text}`; use `0..9` or `1,2,3`"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b = b.trim().trim_start_matches('=');
        let b: u64 = b.parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

/// Parse a comma-separated list of reals.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("cannot parse `{s}` as a number")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_syntax() {
        assert_eq!(parse_seeds("0..9").unwrap().len(), 10);
        assert_eq!(parse_seeds("3..=4").unwrap(), vec![3, 4]);
        assert_eq!(parse_seeds("1, 5,7").unwrap(), vec![1, 5, 7]);
        assert_eq!(parse_seeds("42").unwrap(), vec![42]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"softplus_beta": 10, "synth": {"class_count": 5}}"#).unwrap();
        assert_eq!(cfg.softplus_beta, 10.0);
        assert_eq!(cfg.synth.class_count, 5);
        assert_eq!(cfg.synth.margin, SynthConfig::default().margin);
        assert_eq!(cfg.alphas, vec![0.1]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"nonsense": 1}"#).is_err());
    }

    #[test]
    fn variants_and_validation() {
        let mut cfg = ExperimentConfig {
            modulation: Modulation::Energy,
            compare_base: true,
            ..Default::default()
        };
        let names: Vec<String> = cfg.variants().into_iter().map(|v| v.name).collect();
        assert_eq!(names, vec!["aps", "energy-aps"]);
        cfg.prevalence = true;
        cfg.modulation = Modulation::None;
        cfg.score = BaseScore::Lac;
        assert_eq!(cfg.variants()[1].name, "pas-lac");
        assert!(cfg.validate().is_ok());
        cfg.alphas = vec![1.5];
        assert!(cfg.validate().is_err());
    }
}
