//! Making scores comparable: rank normalization against a reference set,
//! ROC curves with AUC, and histograms.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{DataError, Error, Result};
use crate::metrics::MetricKind;

/// Sorted reference scores `T` for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    metric: MetricKind,
    scores: Vec<f64>,
    source_label: String,
}

impl ReferenceSet {
    /// Sorts `scores` ascending. Fails on an empty set or non-finite scores.
    pub fn new(
        metric: MetricKind,
        mut scores: Vec<f64>,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Argument(format!("empty reference set for {metric}")));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("reference score {s} for {metric}")));
        }
        scores.sort_by(f64::total_cmp);
        Ok(Self {
            metric,
            scores,
            source_label: source_label.into(),
        })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn normalize(&self, q: f64) -> f64 {
        rank_normalize(q, self)
    }
}

/// Fraction of reference scores strictly below `q`; ties count as not-less.
pub fn rank_normalize(q: f64, reference: &ReferenceSet) -> f64 {
    let below = reference.scores.partition_point(|&s| s < q);
    below as f64 / reference.scores.len() as f64
}

/// Reads a `metric,score` CSV (rows in any order) into one sorted set per metric.
pub fn load_references(path: impl AsRef<Path>) -> Result<BTreeMap<MetricKind, ReferenceSet>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::Csv(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_owned()))
    };
    let (metric_col, score_col) = (col("metric")?, col("score")?);

    let mut by_metric: BTreeMap<MetricKind, Vec<f64>> = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let metric: MetricKind = record[metric_col].parse()?;
        let raw = &record[score_col];
        let score: f64 = raw.trim().parse().map_err(|_| DataError::NonNumeric {
            row,
            column: "score".into(),
            value: raw.to_owned(),
        })?;
        by_metric.entry(metric).or_default().push(score);
    }
    let label = path.display().to_string();
    by_metric
        .into_iter()
        .map(|(m, scores)| Ok((m, ReferenceSet::new(m, scores, label.clone())?)))
        .collect()
}

/// Reads the reference set for a single metric from a `metric,score` CSV.
pub fn load_reference(path: impl AsRef<Path>, metric: MetricKind) -> Result<ReferenceSet> {
    let path = path.as_ref();
    load_references(path)?.remove(&metric).ok_or_else(|| {
        Error::Argument(format!(
            "{} has no reference scores for {metric}",
            path.display()
        ))
    })
}

pub fn write_references<'a>(
    path: impl AsRef<Path>,
    sets: impl IntoIterator<Item = &'a ReferenceSet>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = || -> std::io::Result<()> {
        writeln!(out, "metric,score")?;
        for set in sets {
            for s in &set.scores {
                writeln!(out, "{},{}", set.metric, s)?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoidal integral of the curve's points.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
            .sum()
    }

    /// Writes `fpr,tpr` rows followed by a `# auc=<value>` line.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "fpr,tpr")?;
            for p in &self.points {
                writeln!(out, "{},{}", p.fpr, p.tpr)?;
            }
            writeln!(out, "# auc={}", self.auc)?;
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// ROC curve for separating `pos` (unusual) from `neg` (normal), treating a
/// higher score as more likely positive.
///
/// One point per distinct threshold, so tied scores produce diagonal
/// segments. The AUC is the Mann-Whitney statistic
/// `P(pos > neg) + ½ P(pos = neg)`, accumulated in integer counts.
pub fn roc(pos: &[f64], neg: &[f64]) -> Result<RocCurve> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Argument(
            "ROC needs at least one positive and one negative score".into(),
        ));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score in ROC input".into()));
    }
    let mut scored: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (n_pos, n_neg) = (pos.len() as u128, neg.len() as u128);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u128, 0u128);
    // Twice the area under the curve in units of one positive × one negative.
    let mut twice_area = 0u128;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = twice_area as f64 / (2 * n_pos * n_neg) as f64;
    Ok(RocCurve { points, auc })
}

/// Area under the ROC curve; see [`roc`].
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    roc(pos, neg).map(|c| c.auc)
}

/// Equal-width histogram over `[lo, hi]`; returns `(bin_center, count)`.
/// Scores outside the range are dropped and `hi` itself lands in the last bin.
pub fn histogram(scores: &[f64], bins: usize, range: (f64, f64)) -> Result<Vec<(f64, usize)>> {
    let (lo, hi) = range;
    if bins == 0 {
        return Err(Error::Argument("histogram needs at least one bin".into()));
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Argument(format!(
            "empty histogram range [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in scores {
        if !(lo..=hi).contains(&s) {
            continue;
        }
        let bin = (((s - lo) / width) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
        .collect())
}
