//! End-to-end scenarios driven by a JSON config.
//!
//! ```json
//! {
//!   "scenario": {"kind": "threshold_split", "feature": 0, "threshold": -3.0, "train_side": "above"},
//!   "data": {"source": "csv", "path": "blobs.csv"},
//!   "model": {"train": {"arch": "2-32-2", "epochs": 20, "learning_rate": 0.01}},
//!   "metrics": ["entropy", "fisher"]
//! }
//! ```
//!
//! Relative paths are resolved against the config file's directory. Trained
//! models are written to the output directory as `model.fgn` (plus member and
//! snapshot files named as by `fisherform train`).

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fisherform::calib::{auc, load_references, roc, ReferenceSet};
use fisherform::metrics::{DirectionNormalization, FisherSettings, MetricKind};
use fisherform::netcore::PROB_CLAMP;
use fisherform::scenarios::{threshold_split, Dataset};
use fisherform::train::{
    evaluate_accuracy, train_classifier, train_ensemble, EnsembleConfig, TrainConfig, TrainOutcome,
};
use fisherform::{DropoutConfig, Model, NetworkSpec};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::{Domain, Side};
use crate::commands::{add_noise, invert, load_models, member_path, noise_domain, snapshot_path};
use crate::data::{fit_to, DataSource};
use crate::table::{score_dataset, Models, ScoreOptions, ScoreTable};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Evaluation data (for threshold_split: the data to split).
    pub data: DataSpec,
    /// Training data when the model is trained here (not used by threshold_split).
    #[serde(default)]
    pub train_data: Option<DataSpec>,
    pub model: ModelSpec,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default = "default_dropout")]
    pub dropout: String,
    /// Seed of the scoring-time dropout masks.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub raw_direction: bool,
    #[serde(default)]
    pub ensemble_mixture: bool,
    #[serde(default)]
    pub reference: ReferenceChoice,
}

fn default_metrics() -> Vec<String> {
    vec!["entropy".into(), "fisher".into()]
}

fn default_passes() -> usize {
    32
}

fn default_dropout() -> String {
    "bernoulli:0.5".into()
}

fn default_fd_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Blobs {
        classes: usize,
        dim: usize,
        per_class: usize,
        #[serde(default = "default_spread")]
        spread: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_label_column() -> String {
    "label".into()
}

fn default_spread() -> f64 {
    1.0
}

impl DataSpec {
    fn source(&self, base: &Path) -> DataSource {
        match self {
            DataSpec::Csv { path, label_column } => DataSource::Csv {
                path: base.join(path),
                label_column: label_column.clone(),
            },
            DataSpec::Idx { images, labels } => DataSource::Idx {
                images: base.join(images),
                labels: base.join(labels),
            },
            &DataSpec::Blobs {
                classes,
                dim,
                per_class,
                spread,
                seed,
            } => DataSource::Blobs {
                classes,
                dim,
                per_class,
                spread,
                seed,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// An existing model file (or ensemble stem).
    Load {
        path: PathBuf,
        #[serde(default)]
        ensemble: Option<usize>,
    },
    /// Train inside the experiment.
    Train(TrainSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub arch: String,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dropout: Option<String>,
    #[serde(default)]
    pub balance_classes: bool,
    #[serde(default)]
    pub ensemble: Option<usize>,
}

fn default_epochs() -> usize {
    10
}

fn default_batch_size() -> usize {
    32
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_optimizer() -> String {
    "adam".into()
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Image,
    Tabular,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideName {
    #[default]
    Below,
    Above,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitScenario {
    pub feature: usize,
    pub threshold: f64,
    /// Which side of the threshold the model is trained on.
    #[serde(default)]
    pub train_side: SideName,
    /// Every k-th training-side row is kept out of training for validation.
    #[serde(default = "default_validation_every")]
    pub validation_every: usize,
}

fn default_validation_every() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    NoiseSweep {
        lambdas: Vec<f64>,
        #[serde(default)]
        noise_seed: u64,
        #[serde(default)]
        domain: Option<DomainName>,
    },
    ChannelInvert {
        channel: usize,
        #[serde(default)]
        layout: Option<String>,
    },
    ThresholdSplit(SplitScenario),
    AucEvolution {
        detect: Detect,
        /// Inclusive epoch range; required when snapshots are loaded from disk.
        #[serde(default)]
        epochs: Option<[usize; 2]>,
    },
}

/// What counts as unusual in an AUC evolution run.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Detect {
    Noise {
        lambda: f64,
        #[serde(default)]
        noise_seed: u64,
        #[serde(default)]
        domain: Option<DomainName>,
    },
    ChannelInvert {
        channel: usize,
        #[serde(default)]
        layout: Option<String>,
    },
    ThresholdSplit(SplitScenario),
}

/// Reference set for the normalized column.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    /// Scores of the normal (negative) inputs.
    #[default]
    Clean,
    /// Scores of the training data.
    Train,
    None,
    File(PathBuf),
}

fn domain(name: Option<DomainName>) -> Option<Domain> {
    name.map(|d| match d {
        DomainName::Image => Domain::Image,
        DomainName::Tabular => Domain::Tabular,
    })
}

/// Normal inputs, unusual inputs and (for splits) the training portion.
struct Prepared {
    train: Option<Dataset>,
    negatives: Dataset,
    positives: Dataset,
    warning: Option<String>,
}

struct Context_ {
    base: PathBuf,
    out: PathBuf,
    cfg: ExperimentConfig,
    opts: ScoreOptions,
}

fn prepare(ctx: &Context_, detect: &Detect) -> Result<Prepared> {
    let data = ctx.cfg.data.source(&ctx.base).load()?;
    let train_data = ctx
        .cfg
        .train_data
        .as_ref()
        .map(|d| d.source(&ctx.base).load())
        .transpose()?;
    match detect {
        Detect::Noise {
            lambda,
            noise_seed,
            domain: d,
        } => {
            let positives =
                add_noise(&data, *lambda, *noise_seed, noise_domain(domain(*d), &data))?;
            Ok(Prepared {
                train: train_data,
                negatives: data,
                positives,
                warning: None,
            })
        }
        Detect::ChannelInvert { channel, layout } => {
            let positives = invert(&data, *channel, layout.as_deref())?;
            Ok(Prepared {
                train: train_data,
                negatives: data,
                positives,
                warning: None,
            })
        }
        Detect::ThresholdSplit(s) => {
            ensure!(
                train_data.is_none(),
                "threshold_split trains on its own split; drop train_data"
            );
            ensure!(
                s.validation_every >= 2,
                "validation_every must be at least 2"
            );
            let side = match s.train_side {
                SideName::Below => Side::Below,
                SideName::Above => Side::Above,
            };
            let spec = crate::data::parse_split(&format!("{}:{}", s.feature, s.threshold), side)?;
            let parts = threshold_split(&data, &spec)?;
            let (validation, fit): (Vec<usize>, Vec<usize>) =
                (0..parts.train.len()).partition(|i| i % s.validation_every == 0);
            ensure!(
                !fit.is_empty() && !validation.is_empty() && !parts.held_out.is_empty(),
                "threshold split leaves {} training, {} validation and {} held-out rows; each side needs some",
                fit.len(),
                validation.len(),
                parts.held_out.len()
            );
            Ok(Prepared {
                train: Some(parts.train.subset(&fit)),
                negatives: parts.train.subset(&validation),
                positives: parts.held_out,
                warning: parts.warning,
            })
        }
    }
}

struct Trained {
    models: Models,
    /// `(epoch, models)` in epoch order; empty unless requested.
    snapshots: Vec<(usize, Models)>,
    info: Value,
}

fn train_config(t: &TrainSpec, snapshots: bool) -> Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: t.epochs,
        batch_size: t.batch_size,
        learning_rate: t.learning_rate,
        optimizer: t.optimizer.parse()?,
        seed: t.seed,
        dropout: t
            .dropout
            .as_deref()
            .map(str::parse::<DropoutConfig>)
            .transpose()?,
        balance_classes: t.balance_classes,
        snapshot_every_epoch: snapshots,
    })
}

fn in_range(epoch: usize, range: Option<[usize; 2]>) -> bool {
    range.is_none_or(|[lo, hi]| (lo..=hi).contains(&epoch))
}

fn obtain_models(
    ctx: &Context_,
    train: Option<&Dataset>,
    range: Option<Option<[usize; 2]>>,
) -> Result<Trained> {
    let want_snapshots = range.is_some();
    let range = range.flatten();
    match &ctx.cfg.model {
        ModelSpec::Load { path, ensemble } => {
            let path = ctx.base.join(path);
            let models = load_models(&path, *ensemble)?;
            let mut snapshots = Vec::new();
            if want_snapshots {
                let [lo, hi] = range.context(
                    "loading snapshots needs an epoch range (\"epochs\": [first, last])",
                )?;
                for epoch in lo..=hi {
                    let files: Vec<PathBuf> = match ensemble {
                        None => vec![snapshot_path(&path, epoch)],
                        Some(n) => (0..*n)
                            .map(|k| snapshot_path(&member_path(&path, k), epoch))
                            .collect(),
                    };
                    if let Some(missing) = files.iter().find(|f| !f.exists()) {
                        bail!("missing snapshot {} for epoch {epoch}", missing.display());
                    }
                    let loaded = files
                        .iter()
                        .map(|f| crate::commands::load(f))
                        .collect::<Result<Vec<_>>>()?;
                    snapshots.push((epoch, to_models(loaded, ensemble.is_some())));
                }
            }
            Ok(Trained {
                models,
                snapshots,
                info: json!({"loaded": path.display().to_string()}),
            })
        }
        ModelSpec::Train(t) => {
            let spec: NetworkSpec = t.arch.parse()?;
            let data = fit_to(
                train.cloned().context(
                    "training inside an experiment needs train_data (or a threshold_split)",
                )?,
                &spec,
            )?;
            let cfg = train_config(t, want_snapshots)?;
            let path = ctx.out.join("model.fgn");
            let outcomes: Vec<TrainOutcome> = match t.ensemble {
                None => vec![train_classifier(&spec, &data, &cfg)?],
                Some(n) => train_ensemble(
                    &spec,
                    &data,
                    &cfg,
                    &EnsembleConfig {
                        member_count: n,
                        base_seed: t.seed,
                    },
                )?,
            };
            let files: Vec<PathBuf> = match t.ensemble {
                None => vec![path.clone()],
                Some(n) => (0..n).map(|k| member_path(&path, k)).collect(),
            };
            for (o, file) in outcomes.iter().zip(&files) {
                save(&spec, o, file)?;
            }
            let as_models =
                |pick: &dyn Fn(&TrainOutcome) -> &fisherform::ParameterVector| -> Result<Models> {
                    let loaded = outcomes
                        .iter()
                        .map(|o| Ok(Model::new(spec.clone(), pick(o).clone())?))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(to_models(loaded, t.ensemble.is_some()))
                };
            let models = as_models(&|o| &o.params)?;
            let mut snapshots = Vec::new();
            for epoch in (1..=t.epochs).filter(|&e| want_snapshots && in_range(e, range)) {
                snapshots.push((epoch, as_models(&|o| &o.snapshots[epoch - 1])?));
            }
            let accuracy = evaluate_accuracy(&spec, &models.base.params, &data)?;
            Ok(Trained {
                models,
                snapshots,
                info: json!({
                    "trained": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
                    "train_rows": data.len(),
                    "train_accuracy": accuracy,
                    "final_loss": outcomes[0].epoch_losses.last(),
                }),
            })
        }
    }
}

fn save(spec: &NetworkSpec, outcome: &TrainOutcome, path: &Path) -> Result<()> {
    fisherform::netcore::save_model(spec, &outcome.params, path)
        .with_context(|| format!("writing {}", path.display()))?;
    for (i, p) in outcome.snapshots.iter().enumerate() {
        let snap = snapshot_path(path, i + 1);
        fisherform::netcore::save_model(spec, p, &snap)
            .with_context(|| format!("writing {}", snap.display()))?;
    }
    Ok(())
}

fn to_models(loaded: Vec<Model>, ensemble: bool) -> Models {
    let base = loaded[0].clone();
    Models {
        base,
        members: if ensemble { loaded } else { Vec::new() },
    }
}

fn fitted(data: &Dataset, models: &Models) -> Result<Dataset> {
    fit_to(data.clone(), &models.base.spec)
}

fn references(
    ctx: &Context_,
    models: &Models,
    clean: &ScoreTable,
    train: Option<&Dataset>,
) -> Result<Option<BTreeMap<MetricKind, ReferenceSet>>> {
    Ok(match &ctx.cfg.reference {
        ReferenceChoice::None => None,
        ReferenceChoice::Clean => Some(clean.references("clean")?),
        ReferenceChoice::Train => {
            let train = train.context("reference \"train\" needs training data")?;
            Some(score_dataset(models, &fitted(train, models)?, &ctx.opts)?.references("train")?)
        }
        ReferenceChoice::File(path) => {
            let path = ctx.base.join(path);
            Some(load_references(&path).with_context(|| format!("loading {}", path.display()))?)
        }
    })
}

fn write_lines(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{header}")?;
    for l in lines {
        writeln!(out, "{l}")?;
    }
    out.flush()
        .with_context(|| format!("writing {}", path.display()))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn noise_sweep(
    ctx: &Context_,
    lambdas: &[f64],
    noise_seed: u64,
    dom: Option<DomainName>,
) -> Result<Value> {
    ensure!(!lambdas.is_empty(), "noise_sweep needs at least one lambda");
    let data = ctx.cfg.data.source(&ctx.base).load()?;
    let train = ctx
        .cfg
        .train_data
        .as_ref()
        .map(|d| d.source(&ctx.base).load())
        .transpose()?;
    let trained = obtain_models(ctx, train.as_ref(), None)?;
    let models = &trained.models;
    let data = fitted(&data, models)?;
    let domain = noise_domain(domain(dom), &data);

    let mut clean = score_dataset(models, &data, &ctx.opts)?;
    let refs = references(ctx, models, &clean, train.as_ref())?;
    clean.normalize(refs.as_ref())?;

    let mut points = Vec::new();
    let mut summary = Vec::new();
    let mut auc_table = BTreeMap::new();
    for &lambda in lambdas {
        let table = if lambda == 0.0 {
            clean.clone()
        } else {
            let mut t = score_dataset(
                models,
                &add_noise(&data, lambda, noise_seed, domain)?,
                &ctx.opts,
            )?;
            t.normalize(refs.as_ref())?;
            t
        };
        for r in &table.rows {
            points.push(format!(
                "{lambda},{},{},{},{},{},{},{}",
                r.id,
                r.metric,
                r.raw,
                r.normalized.map_or(String::new(), |n| n.to_string()),
                r.pred,
                r.label.map_or(String::new(), |l| l.to_string()),
                u8::from(r.label == Some(r.pred)),
            ));
        }
        let accuracy = table.accuracy().unwrap_or(f64::NAN);
        for &metric in &ctx.opts.metrics {
            let raw = table.raw_scores(metric);
            let mean_normalized = match refs {
                Some(_) => mean(&table.normalized_scores(metric)?).to_string(),
                None => String::new(),
            };
            let a = auc(&raw, &clean.raw_scores(metric))?;
            auc_table
                .entry(metric.as_str())
                .or_insert_with(Vec::new)
                .push(json!({"lambda": lambda, "auc": a}));
            summary.push(format!(
                "{lambda},{metric},{},{mean_normalized},{accuracy},{a}",
                mean(&raw)
            ));
        }
    }
    write_lines(
        &ctx.out.join("points.csv"),
        "lambda,id,metric,raw,normalized,pred,label,correct",
        &points,
    )?;
    write_lines(
        &ctx.out.join("summary.csv"),
        "lambda,metric,mean_raw,mean_normalized,accuracy,auc_vs_clean",
        &summary,
    )?;
    Ok(json!({
        "model": trained.info,
        "rows": data.len(),
        "clean_accuracy": clean.accuracy(),
        "auc_vs_clean": auc_table,
        "files": ["points.csv", "summary.csv"],
    }))
}

fn detection(ctx: &Context_, detect: &Detect) -> Result<Value> {
    let prepared = prepare(ctx, detect)?;
    if let Some(w) = &prepared.warning {
        eprintln!("warning: {w}");
    }
    let trained = obtain_models(ctx, prepared.train.as_ref(), None)?;
    let models = &trained.models;
    let negatives = fitted(&prepared.negatives, models)?;
    let positives = fitted(&prepared.positives, models)?;

    let mut neg = score_dataset(models, &negatives, &ctx.opts)?;
    let mut pos = score_dataset(models, &positives, &ctx.opts)?;
    let refs = references(ctx, models, &neg, prepared.train.as_ref())?;
    neg.normalize(refs.as_ref())?;
    pos.normalize(refs.as_ref())?;
    neg.write_csv(&ctx.out.join("negative_scores.csv"))?;
    pos.write_csv(&ctx.out.join("positive_scores.csv"))?;

    let mut files = vec![
        "negative_scores.csv".to_owned(),
        "positive_scores.csv".to_owned(),
    ];
    let mut lines = Vec::new();
    let mut aucs = serde_json::Map::new();
    for &metric in &ctx.opts.metrics {
        let curve = roc(&pos.raw_scores(metric), &neg.raw_scores(metric))?;
        let name = format!("roc_{metric}.csv");
        curve.write_csv(ctx.out.join(&name))?;
        files.push(name);
        lines.push(format!(
            "{metric},{},{},{}",
            curve.auc,
            positives.len(),
            negatives.len()
        ));
        aucs.insert(metric.as_str().to_owned(), json!(curve.auc));
    }
    write_lines(
        &ctx.out.join("auc.csv"),
        "metric,auc,positives,negatives",
        &lines,
    )?;
    files.push("auc.csv".to_owned());
    Ok(json!({
        "model": trained.info,
        "auc": aucs,
        "negative_accuracy": neg.accuracy(),
        "positive_accuracy": pos.accuracy(),
        "negatives": negatives.len(),
        "positives": positives.len(),
        "warning": prepared.warning,
        "files": files,
    }))
}

fn evolution(ctx: &Context_, detect: &Detect, epochs: Option<[usize; 2]>) -> Result<Value> {
    if let Some([lo, hi]) = epochs {
        ensure!(
            lo >= 1 && lo <= hi,
            "epoch range must satisfy 1 <= first <= last"
        );
    }
    let prepared = prepare(ctx, detect)?;
    let trained = obtain_models(ctx, prepared.train.as_ref(), Some(epochs))?;
    ensure!(
        !trained.snapshots.is_empty(),
        "no snapshots in the requested epoch range"
    );
    let mut lines = Vec::new();
    for (epoch, models) in &trained.snapshots {
        let negatives = fitted(&prepared.negatives, models)?;
        let positives = fitted(&prepared.positives, models)?;
        let neg = score_dataset(models, &negatives, &ctx.opts)?;
        let pos = score_dataset(models, &positives, &ctx.opts)?;
        let accuracy = neg.accuracy().unwrap_or(f64::NAN);
        for &metric in &ctx.opts.metrics {
            let a = auc(&pos.raw_scores(metric), &neg.raw_scores(metric))?;
            lines.push(format!("{epoch},{metric},{a},{accuracy}"));
        }
    }
    write_lines(
        &ctx.out.join("evolution.csv"),
        "epoch,metric,auc,accuracy",
        &lines,
    )?;
    Ok(json!({
        "model": trained.info,
        "snapshots": trained.snapshots.len(),
        "rows": lines.len(),
        "files": ["evolution.csv"],
    }))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing experiment config {}", path.display()))
}

pub fn run(config_path: &Path, out: &Path) -> Result<Value> {
    let cfg = load_config(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("")).to_path_buf();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let metrics = cfg
        .metrics
        .iter()
        .map(|m| m.parse::<MetricKind>())
        .collect::<Result<Vec<_>, _>>()?;
    ensure!(!metrics.is_empty(), "experiment needs at least one metric");
    let direction = if cfg.raw_direction {
        DirectionNormalization::Raw
    } else {
        DirectionNormalization::UnitNorm
    };
    let opts = ScoreOptions {
        metrics,
        dropout: cfg.dropout.parse::<DropoutConfig>()?.with_seed(cfg.seed),
        passes: cfg.passes,
        fisher: FisherSettings::new(direction, cfg.fd_step, PROB_CLAMP)?,
        ensemble_mixture: cfg.ensemble_mixture,
    };
    let ctx = Context_ {
        base,
        out: out.to_path_buf(),
        cfg,
        opts,
    };
    let (name, result) = match &ctx.cfg.scenario {
        Scenario::NoiseSweep {
            lambdas,
            noise_seed,
            domain,
        } => (
            "noise_sweep",
            noise_sweep(&ctx, lambdas, *noise_seed, *domain)?,
        ),
        Scenario::ChannelInvert { channel, layout } => (
            "channel_invert",
            detection(
                &ctx,
                &Detect::ChannelInvert {
                    channel: *channel,
                    layout: layout.clone(),
                },
            )?,
        ),
        Scenario::ThresholdSplit(s) => (
            "threshold_split",
            detection(&ctx, &Detect::ThresholdSplit(s.clone()))?,
        ),
        Scenario::AucEvolution { detect, epochs } => {
            ("auc_evolution", evolution(&ctx, detect, *epochs)?)
        }
    };
    let mut summary = json!({
        "command": "experiment",
        "scenario": name,
        "out": out.display().to_string(),
    });
    if let (Value::Object(s), Value::Object(r)) = (&mut summary, result) {
        s.extend(r);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_scenario() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"scenario": {"kind": "threshold_split", "feature": 0, "threshold": -3.0, "train_side": "above"},
                "data": {"source": "csv", "path": "d.csv"},
                "model": {"train": {"arch": "2-8-2"}},
                "reference": {"file": "ref.csv"}}"#,
        )
        .unwrap();
        assert!(matches!(
            cfg.scenario,
            Scenario::ThresholdSplit(SplitScenario {
                feature: 0,
                validation_every: 5,
                ..
            })
        ));
        assert!(matches!(cfg.reference, ReferenceChoice::File(_)));
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"scenario": {"kind": "auc_evolution", "detect": {"kind": "noise", "lambda": 0.5}, "epochs": [1, 3]},
                "data": {"source": "idx", "images": "i", "labels": "l"},
                "model": {"load": {"path": "m.fgn", "ensemble": 5}},
                "reference": "none"}"#,
        )
        .unwrap();
        assert!(matches!(
            cfg.scenario,
            Scenario::AucEvolution {
                detect: Detect::Noise { .. },
                epochs: Some([1, 3])
            }
        ));
        let bad = serde_json::from_str::<ExperimentConfig>(
            r#"{"scenario": {"kind": "noise_sweep", "lambdas": [0], "typo": 1},
                "data": {"source": "blobs", "classes": 2, "dim": 2, "per_class": 3},
                "model": {"load": {"path": "m"}}}"#,
        );
        assert!(bad.is_err());
    }
}
