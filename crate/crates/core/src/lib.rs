//! Split-conformal classification over pre-computed logits, with scores
//! modulated by the free energy (or entropy) of each sample.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: logit datasets, class priors, splits and file formats
//! - [`scores`]: softmax, free energy, and the LAC / APS / RAPS / SAPS
//!   scores with energy, entropy and prevalence modulation
//! - [`conformal`]: calibration and prediction sets
//! - [`metrics`]: coverage, set size and conditional-coverage diagnostics
//! - [`stats`]: Welch's t-test and the Student-t CDF
//! - [`synth`]: synthetic logits, the two-ring toy problem and its MLP
//! - [`cli`]: experiment orchestration behind the `ecp` binary

pub mod cli;
pub mod conformal;
pub mod data;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod scores;
pub mod stats;
pub mod synth;

pub use conformal::{calibrate, conformal_quantile, CalibratedPredictor};
pub use data::{ClassPriors, LogitDataset};
pub use error::{Error, Result};
pub use scores::{BaseScore, Modulation, ScoreParams};
