//! The `ecp` command line: argument parsing, config resolution, experiment
//! orchestration and report output.

mod config;
mod experiment;
mod sweep;

pub use config::{parse_list, parse_seeds, ExperimentConfig, Variant};
pub use experiment::{
    aggregate, load_experiment_data, report_csv_string, report_json_string, run_experiment, run_experiment_on,
    write_report, AggregateRow, ExperimentData, ExperimentReport, MeanSd, ReportFormat, TrialResult, WelchRow,
    CSV_COLUMNS,
};
pub use sweep::{run_sweep, select_min_size_subject_to_coverage, sweep_csv_string, SweepGrid, SweepRow, SWEEP_COLUMNS};

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::conformal::{calibrate, CalibratedPredictor};
use crate::data::{empirical_priors, load_dataset, save_dataset};
use crate::error::Error;
use crate::scores::{BaseScore, Modulation};
use crate::stats::welch_test;
use crate::synth::{
    generate_ood, generate_synthetic, landscape_grid, make_rings, saturation_rays, train_mlp, Bounds, LabelDraw,
    Mlp, PriorSpec, SynthConfig, TrainConfig, TrainedMlp,
};

/// Failure of a CLI invocation, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values; exit code 2.
    Usage(String),
    /// Runtime or I/O failure; exit code 1.
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "ecp", version, about = "Energy-modulated conformal prediction over pre-computed logits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic logit dataset.
    Generate(GenerateArgs),
    /// Train the two-ring MLP and save it as JSON.
    TrainToy(TrainToyArgs),
    /// Evaluate a trained toy MLP on a grid; optionally probe saturation rays.
    Landscape(LandscapeArgs),
    /// Calibrate a predictor on a whole logit file and save it as JSON.
    Calibrate(CalibrateArgs),
    /// Prediction sets for a logit file from a saved predictor.
    Predict(PredictArgs),
    /// Multi-seed split / calibrate / predict / evaluate run.
    ///
    /// CSV reports have one row per (seed, alpha, variant) with columns
    /// seed,alpha,variant,qhat,coverage,avg_size,macro_cov,cov_gap_percent,sscv,wsc.
    Evaluate(EvaluateArgs),
    /// Sweep α × T × τ × β; long-form CSV `T,tau,alpha,beta,variant,avg_size,coverage`.
    Sweep(SweepArgs),
    /// One-tailed Welch test (H1: mean(x) < mean(y)) on two files of numbers.
    Ttest(TtestArgs),
}

/// Synthetic generator flags; any of them selects synthetic input.
#[derive(Debug, Args, Default, Clone)]
pub struct SynthArgs {
    /// Use the synthetic generator (the default when no --logits is given).
    #[arg(long)]
    pub synth: bool,
    #[arg(long)]
    pub synth_classes: Option<usize>,
    #[arg(long)]
    pub synth_samples: Option<usize>,
    /// Exponential prior decay λ (priors ∝ exp(-λ j)).
    #[arg(long)]
    pub synth_imbalance: Option<f64>,
    /// Draw labels uniformly while keeping the prior logit bias.
    #[arg(long)]
    pub synth_balanced: bool,
    #[arg(long)]
    pub synth_margin: Option<f64>,
    #[arg(long)]
    pub synth_noise: Option<f64>,
    #[arg(long)]
    pub synth_scale_mu: Option<f64>,
    #[arg(long)]
    pub synth_scale_sigma: Option<f64>,
    /// Enables label confusion with this temperature.
    #[arg(long)]
    pub synth_flip_temperature: Option<f64>,
    #[arg(long)]
    pub synth_damping: Option<f64>,
    /// Near-constant magnitude, tiny noise, no confusion.
    #[arg(long)]
    pub synth_homogeneous: bool,
    #[arg(long)]
    pub synth_seed: Option<u64>,
}

impl SynthArgs {
    fn any(&self) -> bool {
        self.synth
            || self.synth_homogeneous
            || self.synth_balanced
            || self.synth_classes.is_some()
            || self.synth_samples.is_some()
            || self.synth_imbalance.is_some()
            || self.synth_margin.is_some()
            || self.synth_noise.is_some()
            || self.synth_scale_mu.is_some()
            || self.synth_scale_sigma.is_some()
            || self.synth_flip_temperature.is_some()
            || self.synth_damping.is_some()
            || self.synth_seed.is_some()
    }

    fn apply(&self, base: &SynthConfig) -> SynthConfig {
        let mut c = if self.synth_homogeneous {
            SynthConfig {
                priors: base.priors.clone(),
                ..SynthConfig::homogeneous(base.class_count, base.sample_count, base.seed)
            }
        } else {
            base.clone()
        };
        if let Some(v) = self.synth_classes {
            c.class_count = v;
        }
        if let Some(v) = self.synth_samples {
            c.sample_count = v;
        }
        if let Some(v) = self.synth_imbalance {
            c.priors = PriorSpec::Decay { lambda: v };
        }
        if self.synth_balanced {
            c.label_draw = LabelDraw::Balanced;
        }
        if let Some(v) = self.synth_margin {
            c.margin = v;
        }
        if let Some(v) = self.synth_noise {
            c.noise_sigma = v;
        }
        if let Some(v) = self.synth_scale_mu {
            c.scale_log_mu = v;
        }
        if let Some(v) = self.synth_scale_sigma {
            c.scale_log_sigma = v;
        }
        if let Some(v) = self.synth_flip_temperature {
            c.flip_temperature = Some(v);
        }
        if let Some(v) = self.synth_damping {
            c.confusion_damping = v;
        }
        if let Some(v) = self.synth_seed {
            c.seed = v;
        }
        c
    }
}

/// Flags shared by the experiment-style subcommands. Values given here
/// override those of `--config`.
#[derive(Debug, Args, Default, Clone)]
pub struct ExperimentArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Logit file (`.csv` or binary).
    #[arg(long)]
    pub logits: Option<PathBuf>,
    #[arg(long)]
    pub ood_logits: Option<PathBuf>,
    /// Synthetic OOD stream: generator logits multiplied by this factor.
    #[arg(long)]
    pub ood_shrink: Option<f64>,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long, value_parser = ["lac", "aps", "raps", "saps"])]
    pub score: Option<String>,
    #[arg(long, conflicts_with = "entropy")]
    pub energy: bool,
    #[arg(long)]
    pub entropy: bool,
    #[arg(long)]
    pub prevalence: bool,
    /// One value or a comma list.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Softmax temperature (comma list for `sweep`).
    #[arg(long = "T")]
    pub softmax_temperature: Option<String>,
    /// Energy temperature (comma list for `sweep`).
    #[arg(long)]
    pub tau: Option<String>,
    /// Softplus sharpness (comma list for `sweep`).
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub raps_lambda: Option<f64>,
    #[arg(long)]
    pub kreg: Option<usize>,
    #[arg(long)]
    pub saps_lambda: Option<f64>,
    /// Debug only: use this constant u instead of random tie-breaking.
    #[arg(long)]
    pub fixed_u: Option<f64>,
    /// `0..9` (inclusive), `1,2,3`, or a single seed.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub split_frac: Option<f64>,
    #[arg(long)]
    pub wsc_delta: Option<f64>,
    #[arg(long)]
    pub wsc_directions: Option<usize>,
    #[arg(long, conflicts_with = "wsc_delta")]
    pub no_wsc: bool,
    #[arg(long)]
    pub no_difficulty: bool,
    /// Also run the unmodulated base score and Welch-test the set sizes.
    #[arg(long)]
    pub compare_base: bool,
    #[arg(long)]
    pub small_k: Option<usize>,
}

fn single(name: &str, text: &str) -> CliResult<f64> {
    match parse_list(text).map_err(usage)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(usage(format!("--{name} takes a single value here"))),
    }
}

impl ExperimentArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(Error::io(path, e)))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("config file {}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if self.logits.is_some() && self.synth.any() {
            return Err(usage("--logits cannot be combined with --synth options"));
        }
        if let Some(p) = &self.logits {
            cfg.logits = Some(p.clone());
        }
        if self.synth.any() {
            cfg.logits = None;
        }
        cfg.synth = self.synth.apply(&cfg.synth);
        if let Some(p) = &self.ood_logits {
            cfg.ood_logits = Some(p.clone());
        }
        if let Some(s) = self.ood_shrink {
            cfg.ood_shrink = Some(s);
        }
        if let Some(s) = &self.score {
            cfg.score = s.parse::<BaseScore>().map_err(usage)?;
        }
        if self.energy {
            cfg.modulation = Modulation::Energy;
        }
        if self.entropy {
            cfg.modulation = Modulation::Entropy;
        }
        if self.prevalence {
            cfg.prevalence = true;
        }
        if let Some(a) = &self.alpha {
            cfg.alphas = parse_list(a).map_err(usage)?;
        }
        if let Some(t) = &self.softmax_temperature {
            cfg.softmax_temperature = parse_list(t).map_err(usage)?[0];
        }
        if let Some(t) = &self.tau {
            cfg.energy_temperature = parse_list(t).map_err(usage)?[0];
        }
        if let Some(b) = &self.beta {
            cfg.softplus_beta = parse_list(b).map_err(usage)?[0];
        }
        if let Some(v) = self.raps_lambda {
            cfg.raps_lambda = v;
        }
        if let Some(v) = self.kreg {
            cfg.raps_kreg = v;
        }
        if let Some(v) = self.saps_lambda {
            cfg.saps_lambda = v;
        }
        if let Some(v) = self.fixed_u {
            cfg.fixed_u = Some(v);
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s).map_err(usage)?;
        }
        if let Some(v) = self.split_frac {
            cfg.split_fraction = v;
        }
        if let Some(v) = self.wsc_delta {
            cfg.wsc_delta = Some(v);
        }
        if self.no_wsc {
            cfg.wsc_delta = None;
        }
        if let Some(v) = self.wsc_directions {
            cfg.wsc_directions = v;
        }
        if self.no_difficulty {
            cfg.difficulty_table = false;
        }
        if self.compare_base {
            cfg.compare_base = true;
        }
        if let Some(v) = self.small_k {
            cfg.small_k = v;
        }
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }

    /// Like [`ExperimentArgs::resolve`], insisting on single-valued T, τ, β.
    fn resolve_single(&self) -> CliResult<ExperimentConfig> {
        for (name, v) in [("T", &self.softmax_temperature), ("tau", &self.tau), ("beta", &self.beta)] {
            if let Some(text) = v {
                single(name, text)?;
            }
        }
        self.resolve()
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Multiply the logits by this factor (an OOD stream).
    #[arg(long)]
    pub ood_shrink: Option<f64>,
    /// Output path; `.csv` writes CSV, anything else the binary format.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub r_inner: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_outer: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trained model (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional `x,y,label` CSV of the training points.
    #[arg(long)]
    pub data_out: Option<PathBuf>,
    /// Optional `epoch,loss,accuracy` CSV.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    /// Model JSON written by `train-toy`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
    /// `xmin,xmax,ymin,ymax`.
    #[arg(long, default_value = "-1.5,1.5,-1.5,1.5")]
    pub bounds: String,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Grid CSV `x,y,max_softmax,entropy,neg_energy`.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of saturation rays to probe (0 = none).
    #[arg(long, default_value_t = 0)]
    pub rays: usize,
    #[arg(long, default_value_t = 4.0)]
    pub ray_radius: f64,
    /// JSON output for the ray probes (stdout if absent).
    #[arg(long)]
    pub rays_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Predictor JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub predictor: PathBuf,
    #[arg(long)]
    pub logits: PathBuf,
    /// Output path; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `csv` (index,label,set) or `json`.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Report path; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `json` or `csv`.
    #[arg(long, default_value = "json")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reduce the grid; only `min-size-subject-to-coverage` is supported.
    #[arg(long)]
    pub select: Option<String>,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    /// Numbers separated by commas or whitespace.
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(Error::io(p, e))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(Error::io("<stdout>", e))),
    }
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let cfg = a.synth.apply(&SynthConfig::default());
    let ds = match a.ood_shrink {
        Some(s) => generate_ood(&cfg, s).map_err(usage)?,
        None => generate_synthetic(&cfg).map_err(usage)?,
    };
    save_dataset(&ds, &a.out)?;
    eprintln!("wrote {} samples, {} classes to {}", ds.len(), ds.class_count(), a.out.display());
    Ok(())
}

fn cmd_train_toy(a: &TrainToyArgs) -> CliResult<()> {
    let data = make_rings(a.n, a.r_inner, a.r_outer, a.noise, a.seed).map_err(usage)?;
    let cfg = TrainConfig {
        hidden: a.hidden,
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let trained = train_mlp(&data, &cfg)?;
    std::fs::write(&a.out, serde_json::to_string(&trained).map_err(Error::from)?)
        .map_err(|e| CliError::Runtime(Error::io(&a.out, e)))?;
    if let Some(p) = &a.data_out {
        data.write_csv(p)?;
    }
    if let Some(p) = &a.trace_out {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &trained.trace {
            w.serialize(s).map_err(Error::from)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(Error::Format(e.to_string())))?;
        std::fs::write(p, bytes).map_err(|e| CliError::Runtime(Error::io(p, e)))?;
    }
    eprintln!("final training accuracy {:.4}", trained.final_accuracy());
    Ok(())
}

fn load_model(path: &Path) -> CliResult<Mlp> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(Error::io(path, e)))?;
    if let Ok(t) = serde_json::from_str::<TrainedMlp>(&text) {
        return Ok(t.mlp);
    }
    Ok(serde_json::from_str::<Mlp>(&text).map_err(Error::from)?)
}

fn cmd_landscape(a: &LandscapeArgs) -> CliResult<()> {
    let mlp = load_model(&a.model)?;
    let b = parse_list(&a.bounds).map_err(usage)?;
    let [xmin, xmax, ymin, ymax] = b[..] else {
        return Err(usage("--bounds needs four values: xmin,xmax,ymin,ymax"));
    };
    let grid = landscape_grid(&mlp, Bounds { xmin, xmax, ymin, ymax }, a.resolution, a.tau).map_err(usage)?;
    grid.write_csv(&a.out)?;
    if a.rays > 0 {
        let probes = saturation_rays(&mlp, a.rays, a.ray_radius, a.tau).map_err(usage)?;
        let text = serde_json::to_string_pretty(&probes).map_err(Error::from)? + "\n";
        emit(a.rays_out.as_deref(), &text)?;
    }
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs) -> CliResult<()> {
    let cfg = a.exp.resolve_single()?;
    let [alpha] = cfg.alphas[..] else {
        return Err(usage("calibrate takes a single --alpha"));
    };
    let seed = cfg.seeds[0];
    let loaded = load_experiment_data(&cfg)?;
    let data = loaded.data;
    let mut params = cfg.score_params();
    if let (true, Some(p)) = (cfg.prevalence, loaded.priors) {
        params.priors = Some(p);
    } else if cfg.prevalence {
        let emp = empirical_priors(&data);
        if !emp.absent_classes.is_empty() {
            return Err(CliError::Runtime(Error::Domain(format!(
                "classes {:?} are absent from the calibration data",
                emp.absent_classes
            ))));
        }
        params.priors = Some(emp.priors);
    }
    let pred = calibrate(&data, &params, alpha, seed)?;
    pred.save(&a.out)?;
    eprintln!("qhat = {} from {} calibration samples", pred.qhat, pred.calibration_size);
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> CliResult<()> {
    let pred = CalibratedPredictor::load(&a.predictor)?;
    let ds = load_dataset(&a.logits)?;
    let sets = pred.predict_batch(&ds)?;
    let text = match a.format.as_str() {
        "json" => serde_json::to_string(&sets).map_err(Error::from)? + "\n",
        "csv" => {
            let mut s = String::from("index,label,set\n");
            for (i, set) in sets.iter().enumerate() {
                let labels: Vec<String> = set.iter().map(usize::to_string).collect();
                s.push_str(&format!("{i},{},{}\n", ds.label(i), labels.join(" ")));
            }
            s
        }
        other => return Err(usage(format!("unknown format `{other}`"))),
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let format: ReportFormat = a.format.parse().map_err(usage)?;
    let cfg = a.exp.resolve_single()?;
    let report = run_experiment(&cfg)?;
    for t in &report.trials {
        eprintln!("seed {} alpha {} {}: {:.1} ms", t.seed, t.alpha, t.variant, t.wall_time_ms);
    }
    for row in &report.aggregate {
        let m = &row.metrics;
        eprintln!(
            "alpha {} {}: coverage {:.4}, avg size {:.3} over {} trials",
            row.alpha, row.variant, m["coverage"].mean, m["avg_size"].mean, row.trials
        );
    }
    for t in &report.trials {
        if !t.report.config.excluded_classes.is_empty() {
            eprintln!(
                "warning: seed {}: classes {:?} have no test samples and are left out of class-wise metrics",
                t.seed, t.report.config.excluded_classes
            );
            break;
        }
    }
    let text = match format {
        ReportFormat::Json => report_json_string(&report)?,
        ReportFormat::Csv => report_csv_string(&report)?,
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let cfg = a.exp.resolve()?;
    let axis = |v: &Option<String>, default: f64| -> CliResult<Vec<f64>> {
        match v {
            Some(t) => parse_list(t).map_err(usage),
            None => Ok(vec![default]),
        }
    };
    let grid = SweepGrid {
        softmax_temperatures: axis(&a.exp.softmax_temperature, cfg.softmax_temperature)?,
        energy_temperatures: axis(&a.exp.tau, cfg.energy_temperature)?,
        betas: axis(&a.exp.beta, cfg.softplus_beta)?,
    };
    let data = load_experiment_data(&cfg)?;
    let mut rows = run_sweep(&cfg, &data, &grid)?;
    match a.select.as_deref() {
        None => {}
        Some("min-size-subject-to-coverage") => rows = select_min_size_subject_to_coverage(&rows),
        Some(other) => return Err(usage(format!("unknown --select `{other}`"))),
    }
    emit(a.out.as_deref(), &sweep_csv_string(&rows)?)
}

fn read_numbers(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(Error::io(path, e)))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Runtime(Error::Format(format!("`{s}` in {} is not a number", path.display()))))
        })
        .collect()
}

fn cmd_ttest(a: &TtestArgs) -> CliResult<()> {
    let w = welch_test(&read_numbers(&a.x)?, &read_numbers(&a.y)?)?;
    let text = serde_json::json!({ "t": w.t, "df": w.df, "p": w.p });
    emit(None, &format!("{text}\n"))
}

/// Cap the rayon pool at `ECP_THREADS` when set.
fn configure_threads() {
    if let Some(n) = std::env::var("ECP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // fails only if the pool is already built, which is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::TrainToy(a) => cmd_train_toy(a),
        Command::Landscape(a) => cmd_landscape(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Ttest(a) => cmd_ttest(a),
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
