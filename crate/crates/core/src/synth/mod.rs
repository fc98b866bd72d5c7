//! Synthetic data: a logit generator with planted difficulty and energy
//! structure, a two-ring 2-D dataset, a small MLP trained on it, and the
//! confidence / entropy / energy landscapes of that MLP.

mod landscape;
mod mlp;
mod rings;

pub use landscape::{landscape_grid, saturation_rays, Bounds, LandscapeGrid, RayProbe};
pub use mlp::{gradient_check, train_mlp, Activation, EpochStats, Mlp, TrainConfig, TrainedMlp};
pub use rings::{make_rings, RingData};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassPriors, LogitDataset};
use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng, SampleRng};

/// Class priors of the generator, given explicitly or as an exponential decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    Explicit(ClassPriors),
    Decay { lambda: f64 },
}

impl PriorSpec {
    pub fn resolve(&self, class_count: usize) -> Result<ClassPriors> {
        match self {
            PriorSpec::Explicit(p) if p.len() == class_count => Ok(p.clone()),
            PriorSpec::Explicit(p) => Err(Error::domain(format!(
                "priors have {} classes, generator has {class_count}",
                p.len()
            ))),
            PriorSpec::Decay { lambda } => ClassPriors::exponential_decay(class_count, *lambda),
        }
    }
}

/// How labels are drawn. `Balanced` draws labels uniformly while the logits
/// still carry the training-prior bias, i.e. a balanced test set scored by a
/// model trained on imbalanced data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelDraw {
    #[default]
    Priors,
    Balanced,
}

/// Parameters of the synthetic logit generator.
///
/// Each sample draws a label `y`, base logits `g_k = σ·z_k`, a margin ladder
/// over `y` and `m` confusers (`m` counts successes of a Bernoulli with rate
/// `exp(-1/flip_temperature)`), and a magnitude `c = exp(μ + s·z)·(1+m)^(-γ)`.
/// The emitted row is `c·g + w·ln(K·p_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub class_count: usize,
    pub sample_count: usize,
    pub priors: PriorSpec,
    pub label_draw: LabelDraw,
    pub margin: f64,
    pub noise_sigma: f64,
    pub scale_log_mu: f64,
    pub scale_log_sigma: f64,
    /// `None` disables label confusion.
    pub flip_temperature: Option<f64>,
    pub confusion_damping: f64,
    pub ladder_decay: f64,
    pub prior_logit_weight: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            class_count: 100,
            sample_count: 10_000,
            priors: PriorSpec::Decay { lambda: 0.0 },
            label_draw: LabelDraw::Priors,
            margin: 5.0,
            noise_sigma: 1.0,
            scale_log_mu: 1.0,
            scale_log_sigma: 0.5,
            flip_temperature: None,
            confusion_damping: 0.3,
            ladder_decay: 0.1,
            prior_logit_weight: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn new(class_count: usize, sample_count: usize, seed: u64) -> Self {
        Self {
            class_count,
            sample_count,
            seed,
            ..Self::default()
        }
    }

    /// Near-constant logit magnitude with tiny noise and no confusion: every
    /// sample has almost the same free energy.
    pub fn homogeneous(class_count: usize, sample_count: usize, seed: u64) -> Self {
        Self {
            noise_sigma: 0.02,
            scale_log_sigma: 0.0,
            ..Self::new(class_count, sample_count, seed)
        }
    }

    pub fn validate(&self) -> Result<ClassPriors> {
        if self.class_count < 2 {
            return Err(Error::domain("generator needs at least two classes"));
        }
        if self.sample_count == 0 {
            return Err(Error::domain("generator needs at least one sample"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("margin", self.margin)?;
        positive("noise sigma", self.noise_sigma)?;
        if let Some(t) = self.flip_temperature {
            positive("flip temperature", t)?;
        }
        let finite = [
            ("scale log mu", self.scale_log_mu),
            ("scale log sigma", self.scale_log_sigma),
            ("confusion damping", self.confusion_damping),
            ("prior logit weight", self.prior_logit_weight),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite")));
            }
        }
        if self.scale_log_sigma < 0.0 || self.confusion_damping < 0.0 {
            return Err(Error::domain("scale log sigma and confusion damping must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.ladder_decay) {
            return Err(Error::domain("ladder decay must lie in [0, 1)"));
        }
        let priors = self.priors.resolve(self.class_count)?;
        if self.prior_logit_weight != 0.0 && !priors.zero_classes().is_empty() {
            return Err(Error::domain("prior logit bias needs positive priors"));
        }
        Ok(priors)
    }
}

fn draw_label(rng: &mut SampleRng, cdf: &[f64], draw: LabelDraw) -> usize {
    let k = cdf.len();
    match draw {
        LabelDraw::Balanced => rng.below(k as u64) as usize,
        LabelDraw::Priors => {
            let u = rng.uniform() * cdf[k - 1];
            cdf.partition_point(|&c| c <= u).min(k - 1)
        }
    }
}

fn sample_row(cfg: &SynthConfig, bias: &[f64], cdf: &[f64], rng: &mut SampleRng) -> (u32, Vec<f64>) {
    let k = cfg.class_count;
    let y = draw_label(rng, cdf, cfg.label_draw);
    let mut c = (cfg.scale_log_mu + cfg.scale_log_sigma * rng.normal()).exp();
    let mut g: Vec<f64> = (0..k).map(|_| cfg.noise_sigma * rng.normal()).collect();

    let mut m = 0;
    if let Some(t) = cfg.flip_temperature {
        let kappa = (-1.0 / t).exp();
        while m < k - 1 && rng.uniform() < kappa {
            m += 1;
        }
    }
    // the true label plus m distinct confusers, placed on a shuffled ladder
    let mut others: Vec<usize> = (0..k).filter(|&j| j != y).collect();
    for i in 0..m {
        let j = i + rng.below((others.len() - i) as u64) as usize;
        others.swap(i, j);
    }
    let mut involved: Vec<usize> = others[..m].to_vec();
    involved.push(y);
    for i in (1..involved.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        involved.swap(i, j);
    }
    let mut step = cfg.margin;
    for &j in &involved {
        g[j] += step;
        step *= 1.0 - cfg.ladder_decay;
    }
    c *= (1.0 + m as f64).powf(-cfg.confusion_damping);

    let row = g.iter().zip(bias).map(|(gk, b)| c * gk + b).collect();
    (y as u32, row)
}

/// Draw `cfg.sample_count` labelled logit rows. Bit-identical for a given
/// config regardless of thread count.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<LogitDataset> {
    let priors = cfg.validate()?;
    let k = cfg.class_count;
    let bias: Vec<f64> = if cfg.prior_logit_weight == 0.0 {
        vec![0.0; k]
    } else {
        priors
            .as_slice()
            .iter()
            .map(|&p| cfg.prior_logit_weight * (k as f64 * p).ln())
            .collect()
    };
    let cdf: Vec<f64> = priors
        .as_slice()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let rng = CounterRng::new(cfg.seed, streams::SYNTH);
    let rows: Vec<(u32, Vec<f64>)> = (0..cfg.sample_count)
        .into_par_iter()
        .map(|i| sample_row(cfg, &bias, &cdf, &mut rng.at(i as u64)))
        .collect();
    let mut labels = Vec::with_capacity(rows.len());
    let mut logits = Vec::with_capacity(rows.len() * k);
    for (y, row) in rows {
        labels.push(y);
        logits.extend(row);
    }
    LogitDataset::new(k, labels, logits)
}

/// The in-distribution generator with every logit multiplied by `shrink`.
/// Labels are kept but carry no meaning for OOD use.
pub fn generate_ood(cfg: &SynthConfig, shrink: f64) -> Result<LogitDataset> {
    if !(shrink > 0.0 && shrink <= 1.0) {
        return Err(Error::domain(format!("shrink must lie in (0, 1], got {shrink}")));
    }
    generate_synthetic(cfg)?.scaled(shrink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::empirical_priors;
    use crate::scores::{free_energy, label_rank, softmax_with_temperature};

    #[test]
    fn noiseless_limit_is_all_rank_one() {
        let cfg = SynthConfig {
            noise_sigma: 1e-9,
            scale_log_sigma: 0.0,
            scale_log_mu: 0.0,
            ..SynthConfig::new(10, 500, 3)
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for i in 0..ds.len() {
            let p = softmax_with_temperature(ds.row(i), 1.0).unwrap();
            assert_eq!(label_rank(&p, ds.label(i)).unwrap(), 1);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cfg = SynthConfig {
            flip_temperature: Some(2.0),
            ..SynthConfig::new(20, 300, 11)
        };
        let a = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, generate_synthetic(&cfg).unwrap());
        let other = SynthConfig { seed: 12, ..cfg };
        assert_ne!(a, generate_synthetic(&other).unwrap());
    }

    #[test]
    fn uniform_priors_within_multinomial_band() {
        let k = 10;
        let n = 10_000;
        let ds = generate_synthetic(&SynthConfig::new(k, n, 5)).unwrap();
        let p = empirical_priors(&ds).priors;
        let sd = (0.1f64 * 0.9 / n as f64).sqrt();
        for &v in p.as_slice() {
            assert!((v - 0.1).abs() < 3.3 * sd, "{v}");
        }
    }

    #[test]
    fn decay_priors_ratio() {
        let cfg = SynthConfig {
            priors: PriorSpec::Decay { lambda: 0.03 },
            ..SynthConfig::new(100, 200_000, 1)
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let mut counts = [0f64; 100];
        for &y in ds.labels() {
            counts[y as usize] += 1.0;
        }
        let priors = cfg.priors.resolve(100).unwrap();
        assert!((priors.get(0) / priors.get(99) - (0.03f64 * 99.0).exp()).abs() < 1e-9);
        for j in [0usize, 99] {
            let expect = priors.get(j) * 200_000.0;
            assert!((counts[j] - expect).abs() < 3.0 * expect.sqrt() + 1.0, "class {j}");
        }
    }

    #[test]
    fn ood_shrink() {
        let cfg = SynthConfig::new(10, 2000, 2);
        let id = generate_synthetic(&cfg).unwrap();
        assert_eq!(generate_ood(&cfg, 1.0).unwrap(), id);
        let ood = generate_ood(&cfg, 0.1).unwrap();
        let mean_neg_f = |ds: &LogitDataset| {
            ds.rows().map(|r| -free_energy(r, 1.0).unwrap()).sum::<f64>() / ds.len() as f64
        };
        assert!(mean_neg_f(&ood) < mean_neg_f(&id));
        assert!(generate_ood(&cfg, 0.0).is_err());
        assert!(generate_ood(&cfg, 1.5).is_err());
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad_priors = SynthConfig {
            priors: PriorSpec::Explicit(ClassPriors::new(vec![0.5, 0.5]).unwrap()),
            ..SynthConfig::new(3, 10, 0)
        };
        assert!(generate_synthetic(&bad_priors).is_err());
        let zero = SynthConfig {
            priors: PriorSpec::Explicit(ClassPriors::new(vec![0.5, 0.5, 0.0]).unwrap()),
            ..SynthConfig::new(3, 10, 0)
        };
        assert!(generate_synthetic(&zero).is_err());
        let no_noise = SynthConfig {
            noise_sigma: 0.0,
            ..SynthConfig::new(3, 10, 0)
        };
        assert!(generate_synthetic(&no_noise).is_err());
    }
}
