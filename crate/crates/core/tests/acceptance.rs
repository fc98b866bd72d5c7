//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use energy_cp::cli::{run_experiment, ExperimentConfig};
use energy_cp::conformal::{
    calibrate, conformal_quantile, set_from_scores,
};
use energy_cp::data::{split_dataset, LogitDataset, SplitSpec};
use energy_cp::metrics::{
    empirical_coverage, evaluate_sets, worst_slab_coverage, EvalOptions, PredictionSet,
};
use energy_cp::rng::{permutation, CounterRng};
use energy_cp::scores::{
    base_scores, draw_u, free_energy, label_rank, score_row, softmax_with_temperature, BaseScore, Modulation,
    ScoreParams,
};
use energy_cp::stats::{mean, welch_one_tailed_p};
use energy_cp::synth::{
    generate_ood, generate_synthetic, gradient_check, make_rings, saturation_rays, train_mlp, Activation, LabelDraw,
    Mlp, PriorSpec, SynthConfig, TrainConfig,
};

// tolerances
const LSE_TOL: f64 = 1e-9;
const COVERAGE_BELOW: f64 = 0.01;
const COVERAGE_ABOVE: f64 = 0.015;
const SIGNIFICANCE: f64 = 0.01;
const OOD_ID_SIZE_TOL: f64 = 0.05;
const BETA_PLATEAU_TOL: f64 = 0.01;
const GRAD_TOL: f64 = 1e-4;
const STRATIFIED_TOL: f64 = 1e-12;
const ANTISYMMETRY_TOL: f64 = 1e-9;
const SATURATED_SOFTMAX_SLOPE: f64 = 1e-3;

const N_CAL: usize = 2000;
const N_TEST: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Benchmark config shared by criteria 2 and 10: default generator, N_CAL
/// calibration and N_TEST test samples per split.
fn benchmark_config() -> ExperimentConfig {
    ExperimentConfig {
        synth: SynthConfig::new(100, N_CAL + N_TEST, 2024),
        split_fraction: (N_CAL as f64 + 0.5) / (N_CAL + N_TEST) as f64,
        seeds: (0..10).collect(),
        alphas: vec![0.1, 0.05],
        wsc_delta: None,
        difficulty_table: false,
        ..Default::default()
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rng = CounterRng::new(1, 0xA1);
    let mut mismatches = 0;
    for case in 0..10_000u64 {
        let mut s = rng.at(case);
        let n = 1 + s.below(300) as usize;
        // alpha = j / 10^d so the oracle can use integer arithmetic
        let denom: u64 = if case % 2 == 0 { 1000 } else { 10_000 };
        let j = 1 + s.below(denom - 1);
        let alpha = j as f64 / denom as f64;
        let coarse = case % 3 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let v = s.uniform();
                if coarse {
                    (v * 10.0).floor() / 10.0
                } else {
                    v * 4.0 - 1.0
                }
            })
            .collect();
        let num = (n as u64 + 1) * (denom - j);
        let m = num.div_ceil(denom) as usize;
        let expected = if m > n {
            f64::INFINITY
        } else {
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted[m - 1]
        };
        let got = conformal_quantile(&scores, alpha).unwrap();
        if got.to_bits() != expected.to_bits() {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("10000 instances, {mismatches} mismatches, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst = String::new();
    let mut pass = true;
    let mut runs = 0;
    for base in BaseScore::ALL {
        for (modulation, prevalence) in [
            (Modulation::None, false),
            (Modulation::Energy, false),
            (Modulation::Entropy, false),
            (Modulation::None, true),
        ] {
            let cfg = ExperimentConfig {
                score: base,
                modulation,
                prevalence,
                ..benchmark_config()
            };
            let report = run_experiment(&cfg).expect("experiment");
            for row in &report.aggregate {
                runs += 1;
                let cov = row.metrics["coverage"].mean;
                let target = 1.0 - row.alpha;
                let ok = cov >= target - COVERAGE_BELOW && cov <= target + COVERAGE_ABOVE;
                if !ok {
                    pass = false;
                    worst.push_str(&format!(" {}@{}={cov:.4}", row.variant, row.alpha));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    let detail = if worst.is_empty() {
        format!("{runs} variant/alpha cells in band, {:.1}s", elapsed.as_secs_f64())
    } else {
        format!("out of band:{worst}; {:.1}s", elapsed.as_secs_f64())
    };
    outcome(pass, detail)
}

fn criterion_3() -> Outcome {
    let ds = generate_synthetic(&SynthConfig {
        flip_temperature: Some(2.0),
        ..SynthConfig::new(100, N_CAL + N_TEST, 7)
    })
    .unwrap();
    let (cal, test) = split_dataset(
        &ds,
        SplitSpec {
            calibration_fraction: (N_CAL as f64 + 0.5) / ds.len() as f64,
            seed: 3,
        },
    )
    .unwrap();
    let mut checked = 0;
    let mut equal = 0;
    for base in BaseScore::ALL {
        let params = ScoreParams::new(base).with_modulation(Modulation::Energy);
        let pred = calibrate(&cal, &params, 0.1, 3).unwrap();
        let rng = CounterRng::new(3, energy_cp::rng::streams::TEST_U);
        for i in 0..test.len() {
            let u = draw_u(&params, rng, i);
            let theta = pred.sample_threshold(test.row(i)).unwrap();
            let by_threshold = set_from_scores(&base_scores(test.row(i), &params, u).unwrap(), theta);
            checked += 1;
            equal += (by_threshold == pred.prediction_set(test.row(i), u).unwrap()) as usize;
        }
    }
    outcome(
        checked >= 10_000 && equal == checked,
        format!("{equal}/{checked} sets identical across 4 energy scores"),
    )
}

fn criterion_4() -> Outcome {
    let rng = CounterRng::new(4, 0xA4);
    let mut worst = f64::NEG_INFINITY;
    for &tau in &[0.5, 1.0, 4.0] {
        for i in 0..100_000u64 {
            let mut s = rng.at(i);
            let k = 2 + s.below(60) as usize;
            let scale = [0.1, 1.0, 10.0, 100.0][s.below(4) as usize];
            let row: Vec<f64> = (0..k).map(|_| scale * (2.0 * s.uniform() - 1.0)).collect();
            let neg_f = -free_energy(&row, tau).unwrap();
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let upper = m + tau * (k as f64).ln();
            worst = worst.max(m - neg_f).max(neg_f - upper);
        }
    }
    outcome(
        worst <= LSE_TOL,
        format!("3 x 100000 rows, worst bound violation {worst:.3e}"),
    )
}

fn criterion_5() -> Outcome {
    let cal = generate_synthetic(&SynthConfig::new(100, N_CAL, 5)).unwrap();
    let mut identical = 0;
    let mut total = 0;
    // deterministic scores: permute the calibration rows themselves
    for params in [
        ScoreParams::new(BaseScore::Lac),
        ScoreParams::new(BaseScore::Lac).with_modulation(Modulation::Energy),
    ] {
        let q = calibrate(&cal, &params, 0.1, 0).unwrap().qhat;
        for p in 0..100 {
            let perm = permutation(cal.len(), CounterRng::new(p, 0xA5));
            let shuffled = cal.select(&perm).unwrap();
            total += 1;
            identical += (calibrate(&shuffled, &params, 0.1, 0).unwrap().qhat.to_bits() == q.to_bits()) as usize;
        }
    }
    // randomized scores: each row keeps its own u when permuted
    for base in [BaseScore::Aps, BaseScore::Raps, BaseScore::Saps] {
        let params = ScoreParams::new(base).with_modulation(Modulation::Energy);
        let rng = CounterRng::new(0, energy_cp::rng::streams::CALIBRATION_U);
        let us: Vec<f64> = (0..cal.len()).map(|i| draw_u(&params, rng, i)).collect();
        let scores_in = |order: &[usize]| -> Vec<f64> {
            order
                .iter()
                .map(|&i| score_row(cal.row(i), &params, us[i]).unwrap().scores[cal.label(i)])
                .collect()
        };
        let identity: Vec<usize> = (0..cal.len()).collect();
        let q = conformal_quantile(&scores_in(&identity), 0.1).unwrap();
        for p in 0..100 {
            let perm = permutation(cal.len(), CounterRng::new(p, 0xA6));
            total += 1;
            identical += (conformal_quantile(&scores_in(&perm), 0.1).unwrap().to_bits() == q.to_bits()) as usize;
        }
    }
    outcome(identical == total, format!("{identical}/{total} permuted calibrations give the same qhat"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let data = make_rings(1000, 0.5, 1.0, 0.05, 0).unwrap();
    let trained = train_mlp(&data, &TrainConfig::default()).unwrap();
    let acc = trained.final_accuracy();
    let rays = saturation_rays(&trained.mlp, 20, 4.0, 1.0).unwrap();
    let max_dpi = rays.iter().map(|r| r.dpi_max.abs()).fold(0.0, f64::max);
    let min_de = rays.iter().map(|r| r.dneg_energy).fold(f64::INFINITY, f64::min);
    let max_de = rays.iter().map(|r| r.dneg_energy).fold(f64::NEG_INFINITY, f64::max);
    let elapsed = start.elapsed();
    let pass = acc >= 0.99
        && max_dpi < SATURATED_SOFTMAX_SLOPE
        && min_de >= 0.9
        && max_de <= 1.0 + 1e-6
        && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "train acc {acc:.4}; ray ends: max dπ/df {max_dpi:.2e}, d(-F)/df in [{min_de:.6}, {max_de:.6}]; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn neg_energies_by_rank(ds: &LogitDataset) -> Vec<(usize, f64)> {
    (0..ds.len())
        .map(|i| {
            let p = softmax_with_temperature(ds.row(i), 1.0).unwrap();
            (label_rank(&p, ds.label(i)).unwrap(), -free_energy(ds.row(i), 1.0).unwrap())
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let ds = generate_synthetic(&SynthConfig {
        flip_temperature: Some(2.0),
        ..SynthConfig::new(100, 100_000, 17)
    })
    .unwrap();
    let pairs = neg_energies_by_rank(&ds);
    let bins = [(1, 1), (2, 3), (4, 6), (7, 10)];
    let groups: Vec<Vec<f64>> = bins
        .iter()
        .map(|&(lo, hi)| pairs.iter().filter(|(r, _)| (lo..=hi).contains(r)).map(|&(_, e)| e).collect())
        .collect();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let mut pass = true;
    let mut ps = Vec::new();
    for b in 0..3 {
        let p = welch_one_tailed_p(&groups[b + 1], &groups[b]).unwrap();
        pass &= means[b + 1] < means[b] && p < SIGNIFICANCE;
        ps.push(p);
    }
    let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
    outcome(
        pass,
        format!(
            "mean -F by rank bin {:.3?} (n {counts:?}), adjacent-gap p {}",
            means,
            ps.iter().map(|p| format!("{p:.1e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let ds = generate_synthetic(&SynthConfig {
        priors: PriorSpec::Decay { lambda: 0.03 },
        label_draw: LabelDraw::Balanced,
        ..SynthConfig::new(100, 20_000, 8)
    })
    .unwrap();
    let mut head = Vec::new();
    let mut tail = Vec::new();
    for i in 0..ds.len() {
        let e = -free_energy(ds.row(i), 1.0).unwrap();
        match ds.label(i) {
            0..=9 => head.push(e),
            90..=99 => tail.push(e),
            _ => {}
        }
    }
    let p = welch_one_tailed_p(&tail, &head).unwrap();
    outcome(
        mean(&head) > mean(&tail) && p < SIGNIFICANCE,
        format!(
            "head mean -F {:.3} (n {}), tail {:.3} (n {}), p {p:.1e}",
            mean(&head),
            head.len(),
            mean(&tail),
            tail.len()
        ),
    )
}

struct OodSizes {
    id_base: f64,
    id_energy: f64,
    ood_base: f64,
    ood_energy: f64,
}

fn ood_sizes(cfg: &SynthConfig, shrink: f64, alpha: f64, seeds: u64) -> OodSizes {
    let ds = generate_synthetic(cfg).unwrap();
    let ood = generate_ood(
        &SynthConfig {
            seed: cfg.seed + 1,
            sample_count: N_TEST,
            ..cfg.clone()
        },
        shrink,
    )
    .unwrap();
    let mut acc = [0.0; 4];
    for seed in 0..seeds {
        let (cal, test) = split_dataset(
            &ds,
            SplitSpec {
                calibration_fraction: (N_CAL as f64 + 0.5) / ds.len() as f64,
                seed,
            },
        )
        .unwrap();
        for (v, modulation) in [Modulation::None, Modulation::Energy].into_iter().enumerate() {
            let params = ScoreParams::new(BaseScore::Aps).with_modulation(modulation);
            let pred = calibrate(&cal, &params, alpha, seed).unwrap();
            let size = |d: &LogitDataset| {
                let sets = pred.predict_batch(d).unwrap();
                sets.iter().map(Vec::len).sum::<usize>() as f64 / sets.len() as f64
            };
            acc[v] += size(&test) / seeds as f64;
            acc[2 + v] += size(&ood) / seeds as f64;
        }
    }
    OodSizes {
        id_base: acc[0],
        id_energy: acc[1],
        ood_base: acc[2],
        ood_energy: acc[3],
    }
}

fn criterion_9() -> Outcome {
    let cfg = SynthConfig::homogeneous(100, N_CAL + N_TEST, 9);
    let s = ood_sizes(&cfg, 0.1, 0.05, 3);
    let rel = (s.id_energy - s.id_base).abs() / s.id_base;
    let pass = s.ood_energy > s.id_energy && s.ood_energy > s.ood_base && rel <= OOD_ID_SIZE_TOL;
    let d = ood_sizes(&SynthConfig::new(100, N_CAL + N_TEST, 9), 0.1, 0.05, 1);
    outcome(
        pass,
        format!(
            "homogeneous ID: base ID {:.3}, energy ID {:.3} (rel {:.2}%), base OOD {:.2}, energy OOD {:.2} \
             | default generator (informational): base ID {:.2}, energy ID {:.2}, base OOD {:.2}, energy OOD {:.2}",
            s.id_base,
            s.id_energy,
            100.0 * rel,
            s.ood_base,
            s.ood_energy,
            d.id_base,
            d.id_energy,
            d.ood_base,
            d.ood_energy
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for base in BaseScore::ALL {
        let sizes: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&beta| {
                let cfg = ExperimentConfig {
                    score: base,
                    modulation: Modulation::Energy,
                    softplus_beta: beta,
                    alphas: vec![0.1],
                    ..benchmark_config()
                };
                run_experiment(&cfg).unwrap().aggregate[0].metrics["avg_size"].mean
            })
            .collect();
        let hi = sizes.iter().copied().fold(f64::MIN, f64::max);
        let lo = sizes.iter().copied().fold(f64::MAX, f64::min);
        let rel = (hi - lo) / lo;
        worst = worst.max(rel);
        detail.push_str(&format!(" {}: {:.4?} ({:.3}%);", base.name(), sizes, 100.0 * rel));
    }
    outcome(worst < BETA_PLATEAU_TOL, format!("energy avg size over β=1,10,100,1000:{detail}"))
}

fn criterion_11() -> Outcome {
    let rng = CounterRng::new(11, 0xAB);
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let mut s = rng.at(case);
        let h = 2 + s.below(15) as usize;
        let mut mlp = Mlp::new(&[2, h, h, 2], Activation::Relu, case).unwrap();
        // random biases too: zero biases put a dead layer's successor exactly on the ReLU kink
        let params: Vec<f64> = (0..mlp.parameter_count()).map(|_| s.normal()).collect();
        mlp.set_parameters(&params).unwrap();
        let point = [3.0 * s.uniform() - 1.5, 3.0 * s.uniform() - 1.5];
        let label = s.below(2) as usize;
        worst = worst.max(gradient_check(&mlp, &point, label, 1e-5).unwrap());
    }
    outcome(worst <= GRAD_TOL, format!("100 random networks, worst relative error {worst:.2e}"))
}

fn criterion_12() -> Outcome {
    let ds = generate_synthetic(&SynthConfig {
        flip_temperature: Some(2.0),
        ..SynthConfig::new(50, 6000, 12)
    })
    .unwrap();
    let (cal, test) = split_dataset(
        &ds,
        SplitSpec {
            calibration_fraction: 0.5,
            seed: 0,
        },
    )
    .unwrap();
    let params = ScoreParams::new(BaseScore::Raps).with_modulation(Modulation::Energy);
    let pred = calibrate(&cal, &params, 0.1, 0).unwrap();
    let sets: Vec<PredictionSet> = pred.predict_batch(&test).unwrap();
    let cov = empirical_coverage(&sets, test.labels()).unwrap();
    let wsc = worst_slab_coverage(test.logits(), 50, &sets, test.labels(), 1.0, 20, 0).unwrap();
    let report = evaluate_sets(&test, &sets, 0.1, 1.0, 1.0, &EvalOptions::default()).unwrap();
    let table = report.difficulty_table.unwrap();
    let weighted: f64 = table.iter().filter_map(|r| r.coverage.map(|c| c * r.count as f64)).sum::<f64>()
        / table.iter().map(|r| r.count).sum::<usize>() as f64;
    let strat_err = (weighted - cov).abs();

    let rng = CounterRng::new(12, 0xAC);
    let mut anti = 0.0f64;
    for case in 0..2000u64 {
        let mut s = rng.at(case);
        let nx = 2 + s.below(40) as usize;
        let ny = 2 + s.below(40) as usize;
        let shift = 2.0 * s.uniform() - 1.0;
        let xs: Vec<f64> = (0..nx).map(|_| s.normal()).collect();
        let ys: Vec<f64> = (0..ny).map(|_| shift + 3.0 * s.uniform() * s.normal()).collect();
        let p = welch_one_tailed_p(&xs, &ys).unwrap();
        let q = welch_one_tailed_p(&ys, &xs).unwrap();
        anti = anti.max((p + q - 1.0).abs());
    }
    outcome(
        wsc == cov && strat_err <= STRATIFIED_TOL && anti <= ANTISYMMETRY_TOL,
        format!(
            "WSC(δ=1) {wsc} vs coverage {cov}; stratified error {strat_err:.1e}; Welch antisymmetry {anti:.1e}"
        ),
    )
}

fn criterion_13() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: Option<&str>, name: &str| -> Vec<u8> {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ecp"));
        cmd.args([
            "evaluate",
            "--synth-classes",
            "20",
            "--synth-samples",
            "3000",
            "--synth-flip-temperature",
            "2",
            "--score",
            "raps",
            "--energy",
            "--compare-base",
            "--alpha",
            "0.1,0.05",
            "--seeds",
            "0..3",
            "--ood-shrink",
            "0.1",
            "--wsc-directions",
            "20",
        ])
        .arg("--out")
        .arg(&out);
        match threads {
            Some(t) => cmd.env("ECP_THREADS", t),
            None => cmd.env_remove("ECP_THREADS"),
        };
        let status = cmd.output().expect("run ecp").status;
        assert!(status.success(), "ecp evaluate failed");
        std::fs::read(&out).unwrap()
    };
    let a = run(None, "a.json");
    let b = run(None, "b.json");
    let c = run(Some("1"), "c.json");
    let d = run(Some("4"), "d.json");
    let same = a == b && a == c && a == d;
    outcome(
        same && !a.is_empty(),
        format!("4 runs (default, default, ECP_THREADS=1, ECP_THREADS=4), {} bytes each, identical: {same}", a.len()),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 13] = [
        ("quantile matches sort-and-index oracle", criterion_1),
        ("marginal coverage on synthetic benchmark", criterion_2),
        ("energy sets equal sample-threshold sets", criterion_3),
        ("log-sum-exp bounds on -F", criterion_4),
        ("qhat invariant under permutation", criterion_5),
        ("ring MLP accuracy and softmax saturation", criterion_6),
        ("-F decreases with difficulty", criterion_7),
        ("-F separates head from tail classes", criterion_8),
        ("OOD set inflation with energy-APS", criterion_9),
        ("set size plateau in beta", criterion_10),
        ("MLP gradient check", criterion_11),
        ("metric identities", criterion_12),
        ("byte-identical evaluate reports", criterion_13),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        failed += !o.pass as usize;
        println!(
            "criterion {:>2} [{}] {name}: {} ({:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
