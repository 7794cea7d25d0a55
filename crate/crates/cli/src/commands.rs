use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fisherform::calib::{load_references, roc, write_references};
use fisherform::metrics::{DirectionNormalization, FisherSettings};
use fisherform::netcore::{load_model, save_model, PROB_CLAMP};
use fisherform::scenarios::{
    invert_channel, noise_path_indexed, threshold_split, write_csv, Dataset, NoiseDomain,
};
use fisherform::train::{
    evaluate_accuracy, train_classifier, train_ensemble, EnsembleConfig, TrainConfig, TrainOutcome,
};
use fisherform::{Model, NetworkSpec, ParameterVector};
use serde_json::{json, Value};

use crate::args::{Domain, PerturbArgs, PerturbKind, RocArgs, ScoreArgs, ScoringArgs, TrainArgs};
use crate::data::{fit_to, parse_layout, parse_split};
use crate::table::{score_dataset, Models, ScoreOptions, ScoreTable};

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let base = if path.extension().is_some_and(|e| e == "fgn") {
        path.with_extension("")
    } else {
        path.to_path_buf()
    };
    let mut name = OsString::from(base.as_os_str());
    name.push(suffix);
    PathBuf::from(name)
}

/// `<stem>.member<k>.fgn`
pub fn member_path(model: &Path, k: usize) -> PathBuf {
    with_suffix(model, &format!(".member{k}.fgn"))
}

/// `<stem>.epochNNN.fgn`
pub fn snapshot_path(model: &Path, epoch: usize) -> PathBuf {
    with_suffix(model, &format!(".epoch{epoch:03}.fgn"))
}

pub fn load(path: &Path) -> Result<Model> {
    let (spec, params) =
        load_model(path).with_context(|| format!("loading model {}", path.display()))?;
    Ok(Model::new(spec, params)?)
}

/// Loads `model`, or with `ensemble = Some(n)` its `n` member files (member 0
/// doubling as the base model for single-model metrics).
pub fn load_models(model: &Path, ensemble: Option<usize>) -> Result<Models> {
    match ensemble {
        None => Ok(Models {
            base: load(model)?,
            members: Vec::new(),
        }),
        Some(0) => bail!("--ensemble needs at least one member"),
        Some(n) => {
            let members = (0..n)
                .map(|k| load(&member_path(model, k)))
                .collect::<Result<Vec<_>>>()?;
            if members.iter().any(|m| m.spec != members[0].spec) {
                bail!(
                    "ensemble members of {} have different architectures",
                    model.display()
                );
            }
            Ok(Models {
                base: members[0].clone(),
                members,
            })
        }
    }
}

fn save(spec: &NetworkSpec, params: &ParameterVector, path: &Path) -> Result<()> {
    save_model(spec, params, path).with_context(|| format!("writing {}", path.display()))
}

impl ScoringArgs {
    pub fn options(&self) -> Result<ScoreOptions> {
        let direction = if self.raw_direction {
            DirectionNormalization::Raw
        } else {
            DirectionNormalization::UnitNorm
        };
        Ok(ScoreOptions {
            metrics: self.metric.clone(),
            dropout: self.dropout.with_seed(self.seed),
            passes: self.passes,
            fisher: FisherSettings::new(direction, self.fd_step, PROB_CLAMP)?,
            ensemble_mixture: self.mixture,
        })
    }
}

/// Writes one trained model plus its snapshots; returns its JSON summary.
fn write_outcome(
    spec: &NetworkSpec,
    outcome: &TrainOutcome,
    path: &Path,
    data: &Dataset,
    test: Option<&Dataset>,
) -> Result<Value> {
    save(spec, &outcome.params, path)?;
    let snapshots = outcome
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let snap = snapshot_path(path, i + 1);
            save(spec, p, &snap)?;
            Ok(snap.display().to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracy = evaluate_accuracy(spec, &outcome.params, data)?;
    let test_accuracy = test
        .map(|t| evaluate_accuracy(spec, &outcome.params, t))
        .transpose()?;
    eprintln!(
        "{}: train accuracy {accuracy:.4}{}",
        path.display(),
        test_accuracy.map_or(String::new(), |a| format!(", test accuracy {a:.4}"))
    );
    Ok(json!({
        "model": path.display().to_string(),
        "accuracy": accuracy,
        "test_accuracy": test_accuracy,
        "final_loss": outcome.epoch_losses.last(),
        "snapshots": snapshots,
    }))
}

pub fn train(args: &TrainArgs) -> Result<Value> {
    let spec = &args.arch;
    let shape = Some((spec.input_width(), spec.class_count()));
    let data = fit_to(args.data.load(shape)?, spec)?;
    let test = match &args.test_data {
        Some(path) => Some(fit_to(
            args.data
                .sibling(path, args.test_labels.as_deref())?
                .load()?,
            spec,
        )?),
        None => None,
    };
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        optimizer: args.optimizer,
        seed: args.seed,
        dropout: args.dropout,
        balance_classes: args.balance_classes,
        snapshot_every_epoch: args.snapshots,
    };
    let members = match args.ensemble {
        None => {
            let outcome = train_classifier(spec, &data, &cfg)?;
            vec![write_outcome(
                spec,
                &outcome,
                &args.out,
                &data,
                test.as_ref(),
            )?]
        }
        Some(n) => {
            let ens = EnsembleConfig {
                member_count: n,
                base_seed: args.seed,
            };
            train_ensemble(spec, &data, &cfg, &ens)?
                .iter()
                .enumerate()
                .map(|(k, o)| {
                    write_outcome(spec, o, &member_path(&args.out, k), &data, test.as_ref())
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(json!({
        "command": "train",
        "arch": spec.to_string(),
        "epochs": args.epochs,
        "rows": data.len(),
        "accuracy": members[0]["accuracy"],
        "test_accuracy": members[0]["test_accuracy"],
        "members": members,
    }))
}

pub fn score(args: &ScoreArgs) -> Result<Value> {
    let models = load_models(&args.model, args.ensemble)?;
    let spec = &models.base.spec;
    let data = fit_to(
        args.data
            .load(Some((spec.input_width(), spec.class_count())))?,
        spec,
    )?;
    let opts = args.scoring.options()?;
    let mut table = score_dataset(&models, &data, &opts)?;
    if let Some(path) = &args.reference {
        let refs = load_references(path).with_context(|| format!("loading {}", path.display()))?;
        table.normalize(Some(&refs))?;
    }
    table.write_csv(&args.out)?;
    if let Some(path) = &args.emit_reference {
        let refs = table.references(&args.data.data)?;
        write_references(path, refs.values())?;
    }
    Ok(json!({
        "command": "score",
        "out": args.out.display().to_string(),
        "rows": table.rows.len(),
        "datapoints": data.len(),
        "metrics": opts.metrics.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "accuracy": table.accuracy(),
        "normalized": args.reference.is_some(),
    }))
}

pub fn roc_command(args: &RocArgs) -> Result<Value> {
    let pick = |path: &Path| -> Result<Vec<f64>> {
        let table = ScoreTable::read_csv(path)?;
        let scores = if args.normalized {
            table.normalized_scores(args.metric)?
        } else {
            table.raw_scores(args.metric)
        };
        if scores.is_empty() {
            bail!("{} has no {} rows", path.display(), args.metric);
        }
        Ok(scores)
    };
    let (pos, neg) = (pick(&args.positive)?, pick(&args.negative)?);
    let curve = roc(&pos, &neg)?;
    curve.write_csv(&args.out)?;
    Ok(json!({
        "command": "roc",
        "metric": args.metric.as_str(),
        "auc": curve.auc,
        "positives": pos.len(),
        "negatives": neg.len(),
        "out": args.out.display().to_string(),
    }))
}

pub fn noise_domain(domain: Option<Domain>, data: &Dataset) -> NoiseDomain {
    match domain {
        Some(Domain::Image) => NoiseDomain::Image,
        Some(Domain::Tabular) => NoiseDomain::Tabular,
        None if data.image_layout().is_some() => NoiseDomain::Image,
        None => NoiseDomain::Tabular,
    }
}

/// Adds per-row noise; row `i` uses stream `i` of `seed`.
pub fn add_noise(data: &Dataset, lambda: f64, seed: u64, domain: NoiseDomain) -> Result<Dataset> {
    Ok(data.map_inputs(|i, x| noise_path_indexed(x, lambda, seed, i as u64, domain))?)
}

pub fn invert(data: &Dataset, channel: usize, layout: Option<&str>) -> Result<Dataset> {
    let layout = match layout {
        Some(s) => parse_layout(s)?,
        None => data
            .image_layout()
            .context("input has no image layout; pass --layout HxWxC")?,
    };
    let dims = (layout.height, layout.width, layout.channels);
    Ok(data.map_inputs(|_, x| invert_channel(x, dims, channel))?)
}

pub fn perturb(args: &PerturbArgs) -> Result<Value> {
    match &args.kind {
        PerturbKind::Noise {
            data,
            lambda,
            seed,
            domain,
            out,
        } => {
            let input = data.load(None)?;
            let domain = noise_domain(*domain, &input);
            write_csv(&add_noise(&input, *lambda, *seed, domain)?, out)?;
            Ok(json!({
                "command": "perturb",
                "kind": "noise",
                "lambda": lambda,
                "domain": format!("{domain:?}").to_lowercase(),
                "rows": input.len(),
                "out": out.display().to_string(),
            }))
        }
        PerturbKind::Invert {
            data,
            channel,
            layout,
            out,
        } => {
            let input = data.load(None)?;
            write_csv(&invert(&input, *channel, layout.as_deref())?, out)?;
            Ok(json!({
                "command": "perturb",
                "kind": "invert",
                "channel": channel,
                "rows": input.len(),
                "out": out.display().to_string(),
            }))
        }
        PerturbKind::Split {
            data,
            split,
            train_side,
            out,
            held_out,
        } => {
            let input = data.load(None)?;
            let spec = parse_split(split, *train_side)?;
            let parts = threshold_split(&input, &spec)?;
            if let Some(w) = &parts.warning {
                eprintln!("warning: {w}");
            }
            write_csv(&parts.train, out)?;
            write_csv(&parts.held_out, held_out)?;
            Ok(json!({
                "command": "perturb",
                "kind": "split",
                "train_rows": parts.train.len(),
                "held_out_rows": parts.held_out.len(),
                "warning": parts.warning,
                "out": out.display().to_string(),
                "held_out": held_out.display().to_string(),
            }))
        }
    }
}
