//! Datasets and the scenario generators: IDX/CSV loading, noise and
//! channel-inversion perturbations, threshold splits and synthetic blobs.

mod idx;
mod perturb;
mod synth;
mod tabular;

use crate::error::{DataError, Result};

pub use idx::{load_idx, parse_idx_images, parse_idx_labels};
pub use perturb::{invert_channel, noise_path, noise_path_indexed, NoiseDomain};
pub use synth::{blobs_with_centers, synth_blobs};
pub use tabular::{load_csv, write_csv};

/// Height × width × channels of an interleaved (HWC) image vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageLayout {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageLayout {
    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labelled feature vectors of uniform width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
    feature_names: Option<Vec<String>>,
    image_layout: Option<ImageLayout>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(DataError::Invalid("dataset has no rows".into()).into());
        }
        Self::from_parts(inputs, labels, class_count)
    }

    /// Like [`Dataset::new`] but accepts zero rows (split results).
    fn from_parts(inputs: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(DataError::CountMismatch {
                images: inputs.len(),
                labels: labels.len(),
            }
            .into());
        }
        if let Some(first) = inputs.first() {
            let width = first.len();
            if width == 0 {
                return Err(DataError::Invalid("rows have no features".into()).into());
            }
            if let Some(i) = inputs.iter().position(|r| r.len() != width) {
                return Err(DataError::Invalid(format!(
                    "row {i} has {} features, row 0 has {width}",
                    inputs[i].len()
                ))
                .into());
            }
        }
        if let Some(i) = labels.iter().position(|&l| l >= class_count) {
            return Err(DataError::Invalid(format!(
                "row {i} has label {} but there are {class_count} classes",
                labels[i]
            ))
            .into());
        }
        Ok(Self {
            inputs,
            labels,
            class_count,
            feature_names: None,
            image_layout: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.width() && !self.inputs.is_empty() {
            return Err(DataError::Invalid(format!(
                "{} feature names for {} features",
                names.len(),
                self.width()
            ))
            .into());
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_image_layout(mut self, layout: ImageLayout) -> Result<Self> {
        if layout.len() != self.width() && !self.inputs.is_empty() {
            return Err(DataError::Invalid(format!(
                "image layout {}×{}×{} does not match {} features",
                layout.height,
                layout.width,
                layout.channels,
                self.width()
            ))
            .into());
        }
        self.image_layout = Some(layout);
        Ok(self)
    }

    /// Raises the class count, e.g. when a subset lacks the highest label.
    pub fn with_class_count(mut self, class_count: usize) -> Result<Self> {
        if let Some(&l) = self.labels.iter().max() {
            if l >= class_count {
                return Err(DataError::Invalid(format!(
                    "label {l} does not fit {class_count} classes"
                ))
                .into());
            }
        }
        self.class_count = class_count;
        Ok(self)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn image_layout(&self) -> Option<ImageLayout> {
        self.image_layout
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Number of features per row (0 for an empty split).
    pub fn width(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.inputs
            .iter()
            .map(Vec::as_slice)
            .zip(self.labels.iter().copied())
    }

    /// Rows at `indices`, in that order; metadata is kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
            image_layout: self.image_layout,
        }
    }

    /// Same labels and metadata, inputs replaced row by row.
    pub fn map_inputs(
        &self,
        mut f: impl FnMut(usize, &[f64]) -> Result<Vec<f64>>,
    ) -> Result<Dataset> {
        let inputs = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, x)| f(i, x))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::from_parts(inputs, self.labels.clone(), self.class_count)?;
        out.feature_names = self.feature_names.clone();
        out.image_layout = self.image_layout;
        Ok(out)
    }

    /// Row count of each class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainSide {
    /// Rows with `x[feature] < threshold` are the training side.
    Below,
    /// Rows with `x[feature] >= threshold` are the training side.
    AboveOrEqual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub feature_index: usize,
    pub threshold: f64,
    pub train_side: TrainSide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSplit {
    pub train: Dataset,
    pub held_out: Dataset,
    /// Set when one side of the split is empty.
    pub warning: Option<String>,
}

/// Partitions rows by `x[feature] < threshold`. Row order is preserved on both sides.
pub fn threshold_split(data: &Dataset, spec: &SplitSpec) -> Result<ThresholdSplit> {
    if spec.feature_index >= data.width() {
        return Err(DataError::Invalid(format!(
            "split feature {} out of range for {} features",
            spec.feature_index,
            data.width()
        ))
        .into());
    }
    let (below, above): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| data.inputs[i][spec.feature_index] < spec.threshold);
    let (train, held_out) = match spec.train_side {
        TrainSide::Below => (below, above),
        TrainSide::AboveOrEqual => (above, below),
    };
    let warning = match (train.is_empty(), held_out.is_empty()) {
        (true, _) => Some("training side of the split is empty".to_owned()),
        (_, true) => Some("held-out side of the split is empty".to_owned()),
        _ => None,
    };
    Ok(ThresholdSplit {
        train: data.subset(&train),
        held_out: data.subset(&held_out),
        warning,
    })
}
