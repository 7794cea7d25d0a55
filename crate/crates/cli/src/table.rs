use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use fisherform::calib::ReferenceSet;
use fisherform::metrics::{FisherSettings, MetricKind, Scorer, DEFAULT_DROPOUT_PASSES};
use fisherform::scenarios::Dataset;
use fisherform::{DropoutConfig, Model};
use rayon::prelude::*;

pub const HEADER: &str = "id,metric,raw,normalized,pred,label";

fn optional(s: &str) -> Option<&str> {
    (!s.is_empty()).then_some(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: usize,
    pub metric: MetricKind,
    pub raw: f64,
    pub normalized: Option<f64>,
    pub pred: usize,
    pub label: Option<usize>,
}

/// One row per (datapoint, metric), datapoint-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn raw_scores(&self, metric: MetricKind) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.raw)
            .collect()
    }

    /// Normalized scores of `metric`; fails if any row lacks one.
    pub fn normalized_scores(&self, metric: MetricKind) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| {
                r.normalized
                    .with_context(|| format!("row {} has no normalized {metric} score", r.id))
            })
            .collect()
    }

    pub fn metrics(&self) -> Vec<MetricKind> {
        let mut seen: Vec<MetricKind> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.metric) {
                seen.push(r.metric);
            }
        }
        seen
    }

    /// Fills (or clears) the normalized column from per-metric reference sets.
    pub fn normalize(
        &mut self,
        references: Option<&BTreeMap<MetricKind, ReferenceSet>>,
    ) -> Result<()> {
        for row in &mut self.rows {
            row.normalized = match references {
                None => None,
                Some(refs) => {
                    let set = refs
                        .get(&row.metric)
                        .with_context(|| format!("reference file has no {} scores", row.metric))?;
                    Some(set.normalize(row.raw))
                }
            };
        }
        Ok(())
    }

    /// Reference sets built from this table's raw scores.
    pub fn references(&self, source_label: &str) -> Result<BTreeMap<MetricKind, ReferenceSet>> {
        self.metrics()
            .into_iter()
            .map(|m| Ok((m, ReferenceSet::new(m, self.raw_scores(m), source_label)?)))
            .collect()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let mut seen = 0usize;
        let mut correct = 0usize;
        let first = self.rows.first()?.metric;
        for r in self.rows.iter().filter(|r| r.metric == first) {
            seen += 1;
            correct += usize::from(Some(r.pred) == r.label);
        }
        (seen > 0 && self.rows.iter().all(|r| r.label.is_some()))
            .then(|| correct as f64 / seen as f64)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{HEADER}")?;
        for r in &self.rows {
            write!(out, "{},{},{},", r.id, r.metric, r.raw)?;
            if let Some(n) = r.normalized {
                write!(out, "{n}")?;
            }
            write!(out, ",{},", r.pred)?;
            if let Some(l) = r.label {
                write!(out, "{l}")?;
            }
            writeln!(out)?;
        }
        out.flush()
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)
            .with_context(|| format!("opening score file {}", path.display()))?;
        let headers = reader.headers()?.iter().collect::<Vec<_>>().join(",");
        if headers != HEADER {
            bail!(
                "{}: expected header {HEADER:?}, found {headers:?}",
                path.display()
            );
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let ctx = || format!("{} row {i}", path.display());
            rows.push(ScoreRow {
                id: record[0].parse().with_context(ctx)?,
                metric: record[1].parse().with_context(ctx)?,
                raw: record[2].parse().with_context(ctx)?,
                normalized: optional(&record[3])
                    .map(str::parse)
                    .transpose()
                    .with_context(ctx)?,
                pred: record[4].parse().with_context(ctx)?,
                label: optional(&record[5])
                    .map(str::parse)
                    .transpose()
                    .with_context(ctx)?,
            });
        }
        Ok(Self { rows })
    }
}

/// A base model plus optional ensemble members.
#[derive(Debug, Clone)]
pub struct Models {
    pub base: Model,
    pub members: Vec<Model>,
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub metrics: Vec<MetricKind>,
    pub dropout: DropoutConfig,
    pub passes: usize,
    pub fisher: FisherSettings,
    pub ensemble_mixture: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            metrics: vec![MetricKind::Entropy, MetricKind::Fisher],
            dropout: DropoutConfig::bernoulli(0.5, 0).expect("valid rate"),
            passes: DEFAULT_DROPOUT_PASSES,
            fisher: FisherSettings::default(),
            ensemble_mixture: false,
        }
    }
}

impl ScoreOptions {
    fn scorer<'a>(&self, models: &'a Models) -> Scorer<'a> {
        let mut scorer = Scorer::new(&models.base).with_ensemble(&models.members);
        scorer.dropout = self.dropout;
        scorer.passes = self.passes;
        scorer.fisher = self.fisher;
        scorer.ensemble_mixture = self.ensemble_mixture;
        scorer
    }
}

/// Scores every datapoint under every metric. Datapoints are processed in
/// parallel; each score is a pure function of its input, so the table does
/// not depend on the thread count.
pub fn score_dataset(models: &Models, data: &Dataset, opts: &ScoreOptions) -> Result<ScoreTable> {
    let scorer = opts.scorer(models);
    scorer.validate(&opts.metrics)?;
    let per_point: Vec<Vec<ScoreRow>> = data
        .inputs()
        .par_iter()
        .zip(data.labels().par_iter())
        .enumerate()
        .map(|(id, (x, &label))| -> Result<Vec<ScoreRow>> {
            let pred = models.base.forward(x)?.argmax();
            opts.metrics
                .iter()
                .map(|&metric| {
                    let raw = scorer
                        .score(metric, x)
                        .with_context(|| format!("scoring datapoint {id} with {metric}"))?;
                    Ok(ScoreRow {
                        id,
                        metric,
                        raw,
                        normalized: None,
                        pred,
                        label: Some(label),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(ScoreTable {
        rows: per_point.into_iter().flatten().collect(),
    })
}
