//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit on
//! any failure. Run with `cargo test -p fisherform-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use clap::Parser;
use fisherform::calib::{auc, rank_normalize, ReferenceSet};
use fisherform::metrics::{
    entropy, fisher_direction, fisher_form, fisher_form_along, fisher_form_fd, kl_divergence,
    FisherSettings, MetricKind,
};
use fisherform::netcore::{entropy_gradient, forward, perturb_params, PROB_CLAMP};
use fisherform::scenarios::{
    blobs_with_centers, threshold_split, write_csv, Dataset, SplitSpec, TrainSide,
};
use fisherform::train::{evaluate_accuracy, train_classifier, TrainConfig};
use fisherform::{Activation, DenseLayerSpec, DirectionVector, NetworkSpec, ParameterVector};
use fisherform_cli::args::Cli;
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// A random dense net with at most 10⁴ parameters, its parameters and an input.
fn random_case(seed: u64) -> (NetworkSpec, ParameterVector, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let depth = rng.random_range(0..=2);
        let mut widths = vec![rng.random_range(1..=30)];
        for _ in 0..depth {
            widths.push(rng.random_range(2..=60));
        }
        widths.push(rng.random_range(2..=10));
        let spec = NetworkSpec::from_widths(&widths).unwrap();
        if spec.param_count() > 10_000 {
            continue;
        }
        let mut values = Vec::with_capacity(spec.param_count());
        for layer in spec.layers() {
            let scale = (3.0 / layer.in_width as f64).sqrt();
            for _ in 0..layer.in_width * layer.out_width {
                values.push(rng.random_range(-scale..scale));
            }
            for _ in 0..layer.out_width {
                values.push(rng.random_range(-0.5..0.5));
            }
        }
        let x = (0..spec.input_width())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        return (spec, ParameterVector::new(values).unwrap(), x);
    }
}

fn entropy_at(spec: &NetworkSpec, params: &[f64], x: &[f64]) -> f64 {
    entropy(&forward(spec, &ParameterVector::new(params.to_vec()).unwrap(), x).unwrap())
}

/// Below this magnitude a gradient entry is compared absolutely: central
/// differences of an O(1) entropy carry ~1e-11 of rounding noise at step 1e-5.
const GRADIENT_FLOOR: f64 = 1e-6;

fn ac1() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut params_total = 0;
    for seed in 0..20 {
        let (spec, params, x) = random_case(1000 + seed);
        let grad = entropy_gradient(&spec, &params, &x)?;
        let mut theta = params.as_slice().to_vec();
        let step = 1e-5;
        for i in 0..theta.len() {
            let t = theta[i];
            theta[i] = t + step;
            let up = entropy_at(&spec, &theta, &x);
            theta[i] = t - step;
            let down = entropy_at(&spec, &theta, &x);
            theta[i] = t;
            let fd = (up - down) / (2.0 * step);
            let g = grad.as_slice()[i];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(GRADIENT_FLOOR);
            worst = worst.max(rel);
        }
        params_total += params.len();
    }
    Ok((
        worst < 1e-4,
        format!("20 nets, {params_total} coordinates, max relative error {worst:.2e} (< 1e-4)"),
    ))
}

/// Signs of every hidden ReLU pre-activation.
fn relu_pattern(spec: &NetworkSpec, params: &ParameterVector, x: &[f64]) -> Vec<bool> {
    let theta = params.as_slice();
    let mut a = x.to_vec();
    let mut pattern = Vec::new();
    let mut offset = 0;
    for layer in spec.layers() {
        let (n_in, n_out) = (layer.in_width, layer.out_width);
        let w = &theta[offset..offset + n_in * n_out];
        let b = &theta[offset + n_in * n_out..offset + layer.param_count()];
        offset += layer.param_count();
        a = (0..n_out)
            .map(|o| {
                w[o * n_in..(o + 1) * n_in]
                    .iter()
                    .zip(&a)
                    .map(|(w, a)| w * a)
                    .sum::<f64>()
                    + b[o]
            })
            .collect();
        if layer.activation == Activation::Relu {
            pattern.extend(a.iter().map(|&z| z > 0.0));
            a.iter_mut().for_each(|z| *z = z.max(0.0));
        }
    }
    pattern
}

fn ac2() -> Result<(bool, String)> {
    let settings = FisherSettings::default();
    let mut worst: f64 = 0.0;
    let (mut accepted, mut skipped, mut seed) = (0, 0, 2000);
    while accepted < 200 {
        let (spec, params, x) = random_case(seed);
        seed += 1;
        // The finite difference is only consistent where the net is smooth
        // across [θ - hv, θ + hv].
        let v = fisher_direction(&spec, &params, &x, &settings)?.v;
        let h = settings.fd_step / v.norm().max(1.0);
        let pattern = relu_pattern(&spec, &params, &x);
        if [h, -h]
            .iter()
            .any(|&s| relu_pattern(&spec, &perturb_params(&params, &v, s).unwrap(), &x) != pattern)
        {
            skipped += 1;
            continue;
        }
        let f = fisher_form(&spec, &params, &x, &settings)?;
        let fd = fisher_form_fd(&spec, &params, &x, &settings)?;
        worst = worst.max((fd - f).abs() / (f + 1e-12));
        accepted += 1;
    }
    let mut min_f = f64::INFINITY;
    for seed in 0..1000 {
        let (spec, params, x) = random_case(3000 + seed);
        min_f = min_f.min(fisher_form(&spec, &params, &x, &settings)?);
    }
    Ok((
        worst < 1e-3 && min_f >= 0.0,
        format!(
            "200 pairs max |fd - F|/(F + 1e-12) = {worst:.2e} (< 1e-3; {skipped} draws skipped for a ReLU kink inside the FD step); min F over 1000 pairs = {min_f:.3e} (>= 0)"
        ),
    ))
}

fn ac3() -> Result<(bool, String)> {
    let settings = FisherSettings::default();
    let mut cases = 0;
    let mut worst_small: f64 = 0.0;
    let mut shrinks = 0;
    let mut seed = 4000;
    while cases < 50 {
        let (spec, params, x) = random_case(seed);
        seed += 1;
        let dir = fisher_direction(&spec, &params, &x, &settings)?;
        if dir.degenerate {
            continue;
        }
        let f = fisher_form_along(&spec, &params, &x, &dir.v, PROB_CLAMP)?;
        let p = forward(&spec, &params, &x)?;
        let deviation = |eps: f64| -> Result<f64> {
            let q = forward(&spec, &perturb_params(&params, &dir.v, eps)?, &x)?;
            Ok((kl_divergence(&p, &q) / (eps * eps / 2.0 * f) - 1.0).abs())
        };
        let (small, large) = (deviation(1e-3)?, deviation(1e-2)?);
        worst_small = worst_small.max(small);
        shrinks += usize::from(small < large);
        cases += 1;
    }
    Ok((
        worst_small < 0.05 && shrinks == cases,
        format!("50 cases: max |ratio - 1| at eps=1e-3 is {worst_small:.2e} (< 0.05); deviation smaller than at eps=1e-2 in {shrinks}/50"),
    ))
}

fn deterministic_runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Scores from a continuous range mixed with a coarse grid, so ties occur.
fn score() -> impl Strategy<Value = f64> {
    prop_oneof![-30.0..30.0f64, (-20i32..20).prop_map(|k| k as f64 / 4.0)]
}

fn ac4() -> Result<(bool, String)> {
    let mut runner = deterministic_runner(10_000);
    let result = runner.run(
        &(vec(score(), 1..60), score(), score()),
        |(reference, q1, q2)| {
            let set = ReferenceSet::new(MetricKind::Fisher, reference.clone(), "prop").unwrap();
            let n1 = rank_normalize(q1, &set);
            let n2 = rank_normalize(q2, &set);
            prop_assert!((0.0..=1.0).contains(&n1));
            if q1 <= q2 {
                prop_assert!(n1 <= n2);
            }
            for phi in [|s: f64| 3.0 * s + 1.0, |s: f64| s.exp()] {
                let mapped = ReferenceSet::new(
                    MetricKind::Fisher,
                    reference.iter().map(|&s| phi(s)).collect(),
                    "prop",
                )
                .unwrap();
                prop_assert_eq!(rank_normalize(phi(q1), &mapped), n1);
            }
            Ok(())
        },
    );
    Ok(match result {
        Ok(()) => (
            true,
            "10^4 random query/reference pairs: bounded, monotone, exact under 3x+1 and exp".into(),
        ),
        Err(e) => (false, format!("property failed: {e}")),
    })
}

fn brute_force_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut credit = 0.0;
    for &p in pos {
        for &n in neg {
            credit += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    credit / (pos.len() * neg.len()) as f64
}

fn ac5() -> Result<(bool, String)> {
    let mut runner = deterministic_runner(100);
    let result = runner.run(&(vec(score(), 1..40), vec(score(), 1..40)), |(pos, neg)| {
        let a = auc(&pos, &neg).unwrap();
        prop_assert!((a - brute_force_auc(&pos, &neg)).abs() <= 1e-12);
        for phi in [|s: f64| 3.0 * s + 1.0, |s: f64| s.exp()] {
            let mp: Vec<f64> = pos.iter().map(|&s| phi(s)).collect();
            let mn: Vec<f64> = neg.iter().map(|&s| phi(s)).collect();
            prop_assert_eq!(auc(&mp, &mn).unwrap(), a);
        }
        Ok(())
    });
    let separated = auc(&[5.0, 6.0, 7.5], &[-1.0, 0.0, 4.9])?;
    Ok(match result {
        Ok(()) if separated == 1.0 => (
            true,
            "100 random pairs equal the pairwise oracle (1e-12), exact under 3x+1 and exp; separated AUC = 1".into(),
        ),
        Ok(()) => (false, format!("perfectly separated AUC = {separated}")),
        Err(e) => (false, format!("property failed: {e}")),
    })
}

fn ac6() -> Result<(bool, String)> {
    // p(1|x) = σ(θ x) as the second logit of a 1→2 linear layer; θ is w1.
    let spec = NetworkSpec::new(1, 2, vec![DenseLayerSpec::new(1, 2, Activation::Identity)])?;
    let params = ParameterVector::zeros(4);
    let v = DirectionVector::new(vec![0.0, 1.0, 0.0, 0.0])?;
    let f = fisher_form_along(&spec, &params, &[1.0], &v, PROB_CLAMP)?;
    let eps = 1e-4;
    let up = forward(&spec, &perturb_params(&params, &v, eps)?, &[1.0])?;
    let down = forward(&spec, &perturb_params(&params, &v, -eps)?, &[1.0])?;
    let p = forward(&spec, &params, &[1.0])?;
    let oracle: f64 = (0..2)
        .map(|y| {
            let d = (up.as_slice()[y] - down.as_slice()[y]) / (2.0 * eps);
            d * d / p.as_slice()[y]
        })
        .sum();
    Ok((
        (f - 0.25).abs() < 1e-6 && (oracle - 0.25).abs() < 1e-6,
        format!("F = {f} (0.25 within 1e-6), central-difference oracle {oracle:.9}"),
    ))
}

/// Two-class blobs: the training side (x >= -3) holds class 0 at (0, -2) and
/// class 1 at (0, 2); the held-out side mirrors them at (hx, ∓hy).
fn blob_analog(seed: u64, hx: f64, hy: f64) -> Dataset {
    let centers = [vec![0.0, -2.0], vec![0.0, 2.0], vec![hx, -hy], vec![hx, hy]];
    let raw = blobs_with_centers(&centers, 250, seed, 1.0).unwrap();
    Dataset::new(
        raw.inputs().to_vec(),
        raw.labels().iter().map(|l| l % 2).collect(),
        2,
    )
    .unwrap()
}

fn cli(args: &[&str]) -> Result<Value> {
    let cli = Cli::try_parse_from(std::iter::once("fisherform").chain(args.iter().copied()))?;
    fisherform_cli::run(&cli)
}

fn experiment(config: &Value, dir: &Path, out: &str) -> Result<Value> {
    let path = dir.join(format!("{out}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(config)?)?;
    let out = dir.join(out);
    cli(&[
        "experiment",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn ac7() -> Result<(bool, String)> {
    let dir = tempfile::tempdir()?;
    write_csv(&blob_analog(0, -5.0, 1.0), dir.path().join("blobs.csv"))?;
    let config = serde_json::json!({
        "scenario": {"kind": "threshold_split", "feature": 0, "threshold": -3.0, "train_side": "above"},
        "data": {"source": "csv", "path": "blobs.csv"},
        "model": {"train": {"arch": "2-32-2", "epochs": 20, "batch_size": 32, "learning_rate": 0.01, "seed": 0}},
        "metrics": ["entropy", "fisher"]
    });
    let r = experiment(&config, dir.path(), "split")?;
    let accuracy = r["negative_accuracy"].as_f64().context("accuracy")?;
    let f = r["auc"]["fisher"].as_f64().context("fisher auc")?;
    let e = r["auc"]["entropy"].as_f64().context("entropy auc")?;
    Ok((
        accuracy >= 0.95 && f >= 0.65 && f >= e - 0.02,
        format!("held-in accuracy {accuracy:.4} (>= 0.95), AUC fisher {f:.4} (>= 0.65), entropy {e:.4} (fisher >= entropy - 0.02)"),
    ))
}

fn mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

/// Train on MNIST, then sweep λ ∈ {0, 0.5}; returns (test accuracy, fisher AUC at 0.5).
fn mnist_pipeline(dir: &Path) -> Result<(f64, f64)> {
    let m = mnist_dir();
    let file = |name: &str| m.join(name).to_str().unwrap().to_owned();
    let model = dir.join("mnist.fgn");
    let train = cli(&[
        "train",
        "--data",
        &file("train-images-idx3-ubyte.gz"),
        "--labels",
        &file("train-labels-idx1-ubyte.gz"),
        "--test-data",
        &file("t10k-images-idx3-ubyte.gz"),
        "--test-labels",
        &file("t10k-labels-idx1-ubyte.gz"),
        "--arch",
        "784-128-10",
        "--epochs",
        "3",
        "--seed",
        "0",
        "--out",
        model.to_str().unwrap(),
    ])?;
    let config = serde_json::json!({
        "scenario": {"kind": "noise_sweep", "lambdas": [0.0, 0.5], "noise_seed": 1, "domain": "image"},
        "data": {"source": "idx", "images": file("t10k-images-idx3-ubyte.gz"), "labels": file("t10k-labels-idx1-ubyte.gz")},
        "model": {"load": {"path": "mnist.fgn"}},
        "metrics": ["entropy", "fisher"],
        "reference": "clean"
    });
    let sweep = experiment(&config, dir, "sweep")?;
    let accuracy = train["test_accuracy"].as_f64().context("test accuracy")?;
    let auc = sweep["auc_vs_clean"]["fisher"]
        .as_array()
        .and_then(|points| points.iter().find(|p| p["lambda"] == 0.5))
        .and_then(|p| p["auc"].as_f64())
        .context("fisher AUC at lambda 0.5")?;
    Ok((accuracy, auc))
}

fn files_under(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            files.extend(files_under(&path)?);
        } else {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn ac8() -> Result<(bool, String)> {
    ensure!(
        mnist_dir().join("train-images-idx3-ubyte.gz").exists(),
        "MNIST files missing under data/mnist (see scripts/fetch_mnist.sh)"
    );
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    let (accuracy, fisher_auc) = mnist_pipeline(a.path())?;
    mnist_pipeline(b.path())?;
    let first = files_under(a.path())?;
    let second = files_under(b.path())?;
    let mut identical = first.len() == second.len();
    for (x, y) in first.iter().zip(&second) {
        identical &= x.strip_prefix(a.path())? == y.strip_prefix(b.path())?;
        identical &= std::fs::read(x)? == std::fs::read(y)?;
    }
    Ok((
        accuracy >= 0.95 && fisher_auc >= 0.8 && identical,
        format!(
            "test accuracy {accuracy:.4} (>= 0.95) after 3 epochs, fisher AUC noisy(0.5) vs clean {fisher_auc:.4} (>= 0.8), rerun {} ({} files)",
            if identical { "byte-identical" } else { "DIFFERS" },
            first.len()
        ),
    ))
}

fn mean_over(data: &Dataset, f: impl Fn(&[f64]) -> f64) -> f64 {
    data.inputs().iter().map(|x| f(x)).sum::<f64>() / data.len() as f64
}

fn ac9() -> Result<(bool, String)> {
    let data = blob_analog(0, -5.0, 1.0);
    let split = threshold_split(
        &data,
        &SplitSpec {
            feature_index: 0,
            threshold: -3.0,
            train_side: TrainSide::AboveOrEqual,
        },
    )?;
    let fit: Vec<usize> = (0..split.train.len()).filter(|i| i % 5 != 0).collect();
    let train = split.train.subset(&fit);
    let spec = NetworkSpec::from_widths(&[2, 32, 2])?;
    let (early, long) = (20, 200);
    let cfg = TrainConfig {
        epochs: long,
        batch_size: 32,
        learning_rate: 1e-2,
        seed: 0,
        snapshot_every_epoch: true,
        ..TrainConfig::default()
    };
    let outcome = train_classifier(&spec, &train, &cfg)?;
    let settings = FisherSettings::default();
    let held = &split.held_out;
    let max_softmax = mean_over(held, |x| forward(&spec, &outcome.params, x).unwrap().max());
    let f_long = mean_over(held, |x| {
        fisher_form(&spec, &outcome.params, x, &settings).unwrap()
    });
    let snapshot = &outcome.snapshots[early - 1];
    let f_early = mean_over(held, |x| {
        fisher_form(&spec, snapshot, x, &settings).unwrap()
    });
    let accuracy = evaluate_accuracy(&spec, &outcome.params, held)?;
    let saturated = max_softmax > 0.99;
    Ok((
        !saturated || f_long < f_early,
        format!(
            "held-out mean max-softmax after {long} epochs {max_softmax:.6} (> 0.99: {saturated}), mean F {f_early:.4e} at epoch {early} -> {f_long:.4e} at epoch {long}, held-out accuracy {accuracy:.3}"
        ),
    ))
}

fn main() {
    type Check = fn() -> Result<(bool, String)>;
    let criteria: [(&str, &str, Duration, Check); 9] = [
        (
            "AC1",
            "entropy gradient vs central differences",
            Duration::from_secs(60),
            ac1,
        ),
        (
            "AC2",
            "fisher form vs finite-difference variant",
            Duration::from_secs(60),
            ac2,
        ),
        ("AC3", "KL expansion", Duration::from_secs(60), ac3),
        ("AC4", "rank normalization properties", Duration::MAX, ac4),
        ("AC5", "ROC/AUC", Duration::MAX, ac5),
        ("AC6", "closed-form logistic oracle", Duration::MAX, ac6),
        (
            "AC7",
            "threshold-split blob analog",
            Duration::from_secs(120),
            ac7,
        ),
        ("AC8", "MNIST noise analog", Duration::from_secs(600), ac8),
        ("AC9", "saturation probe", Duration::MAX, ac9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with("AC"))
        .collect();
    let mut failed = 0;
    for (id, title, limit, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        let elapsed = start.elapsed();
        let in_time = elapsed < limit;
        let pass = pass && in_time;
        failed += usize::from(!pass);
        let budget = if limit == Duration::MAX {
            String::new()
        } else {
            format!(", limit {}s", limit.as_secs())
        };
        println!(
            "[{}] {id} {title}: {detail} ({:.1}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
