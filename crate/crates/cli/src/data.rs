use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fisherform::scenarios::{
    load_csv, load_idx, synth_blobs, Dataset, ImageLayout, SplitSpec, TrainSide,
};
use fisherform::NetworkSpec;

use crate::args::{DataArgs, DataFormat, Side};

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
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
        spread: f64,
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv { path, label_column } => {
                load_csv(path, label_column).with_context(|| format!("loading {}", path.display()))
            }
            DataSource::Idx { images, labels } => load_idx(images, labels)
                .with_context(|| format!("loading {} / {}", images.display(), labels.display())),
            &DataSource::Blobs {
                classes,
                dim,
                per_class,
                spread,
                seed,
            } => Ok(synth_blobs(classes, per_class, dim, seed, spread)?),
        }
    }
}

impl DataArgs {
    /// `shape` is `(input width, class count)` of the network the data is for.
    pub fn source(&self, shape: Option<(usize, usize)>) -> Result<DataSource> {
        if self.data == "blobs" {
            return Ok(DataSource::Blobs {
                classes: self.blob_classes.or(shape.map(|s| s.1)).unwrap_or(2),
                dim: self.blob_dim.or(shape.map(|s| s.0)).unwrap_or(2),
                per_class: self.blob_count,
                spread: self.blob_spread,
                seed: self.blob_seed,
            });
        }
        let format = self.format.unwrap_or(if self.labels.is_some() {
            DataFormat::Idx
        } else {
            DataFormat::Csv
        });
        self.source_at(Path::new(&self.data), self.labels.as_deref(), format)
    }

    /// Same format and options as `--data`, for another file pair.
    pub fn sibling(&self, data: &Path, labels: Option<&Path>) -> Result<DataSource> {
        let format = self.format.unwrap_or(if labels.is_some() {
            DataFormat::Idx
        } else {
            DataFormat::Csv
        });
        self.source_at(data, labels, format)
    }

    fn source_at(
        &self,
        data: &Path,
        labels: Option<&Path>,
        format: DataFormat,
    ) -> Result<DataSource> {
        match format {
            DataFormat::Csv => {
                if labels.is_some() {
                    bail!("--labels is only used with IDX input");
                }
                Ok(DataSource::Csv {
                    path: data.to_path_buf(),
                    label_column: self.label_column.clone(),
                })
            }
            DataFormat::Idx => Ok(DataSource::Idx {
                images: data.to_path_buf(),
                labels: labels
                    .context("IDX input needs a label file (--labels)")?
                    .to_path_buf(),
            }),
        }
    }

    pub fn load(&self, shape: Option<(usize, usize)>) -> Result<Dataset> {
        self.source(shape)?.load()
    }
}

/// Lifts the class count of `data` to the network's and checks the input width.
pub fn fit_to(data: Dataset, spec: &NetworkSpec) -> Result<Dataset> {
    if data.width() != spec.input_width() {
        bail!(
            "data has {} features but the network expects {}",
            data.width(),
            spec.input_width()
        );
    }
    if data.class_count() > spec.class_count() {
        bail!(
            "data has labels up to {} but the network has {} classes",
            data.class_count() - 1,
            spec.class_count()
        );
    }
    Ok(data.with_class_count(spec.class_count())?)
}

/// Parses `HxWxC` (e.g. `28x28x1`).
pub fn parse_layout(s: &str) -> Result<ImageLayout> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("layout {s:?} is not HxWxC"))?;
    match parts[..] {
        [height, width, channels] => Ok(ImageLayout {
            height,
            width,
            channels,
        }),
        _ => bail!("layout {s:?} is not HxWxC"),
    }
}

/// Parses `<feature>:<threshold>`.
pub fn parse_split(s: &str, side: Side) -> Result<SplitSpec> {
    let (feature, threshold) = s
        .split_once(':')
        .with_context(|| format!("split {s:?} is not <feature>:<threshold>"))?;
    Ok(SplitSpec {
        feature_index: feature
            .trim()
            .parse()
            .with_context(|| format!("split feature {feature:?}"))?,
        threshold: threshold
            .trim()
            .parse()
            .with_context(|| format!("split threshold {threshold:?}"))?,
        train_side: match side {
            Side::Below => TrainSide::Below,
            Side::Above => TrainSide::AboveOrEqual,
        },
    })
}
