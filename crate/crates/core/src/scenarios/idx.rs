//! IDX files as published for MNIST: big-endian, magic `0x00000803` for
//! `u8` image tensors and `0x00000801` for `u8` label vectors. Gzipped files
//! (`.gz`, detected by content) are inflated transparently.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Dataset, ImageLayout};
use crate::error::{DataError, Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gzipped(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Splits off the magic and `dims` big-endian dimensions; returns them and the payload.
fn header(bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<u32>, &[u8])> {
    let need = 4 * (dims + 1);
    if bytes.len() < need {
        if bytes.len() >= 4 {
            check_magic(bytes, magic)?;
        }
        return Err(DataError::IdxTruncated {
            expected: need,
            found: bytes.len(),
        }
        .into());
    }
    check_magic(bytes, magic)?;
    let sizes = bytes[4..need]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()))
        .collect();
    Ok((sizes, &bytes[need..]))
}

fn check_magic(bytes: &[u8], magic: u32) -> Result<()> {
    let found = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if found != magic {
        return Err(DataError::IdxMagic {
            expected: magic,
            found,
        }
        .into());
    }
    Ok(())
}

fn payload_len(sizes: &[u32]) -> Result<usize> {
    sizes
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| DataError::IdxOverflow(sizes.to_vec()).into())
}

fn check_payload(payload: &[u8], expected: usize) -> Result<()> {
    if payload.len() != expected {
        return Err(DataError::IdxTruncated {
            expected,
            found: payload.len(),
        }
        .into());
    }
    Ok(())
}

/// Parses an image file; returns rows scaled to `[0, 1]` and the image layout.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<Vec<f64>>, ImageLayout)> {
    let (sizes, payload) = header(bytes, IMAGE_MAGIC, 3)?;
    check_payload(payload, payload_len(&sizes)?)?;
    let layout = ImageLayout {
        height: sizes[1] as usize,
        width: sizes[2] as usize,
        channels: 1,
    };
    let stride = layout.len();
    if stride == 0 {
        return Err(DataError::Invalid("IDX images have zero pixels".into()).into());
    }
    let rows = payload
        .chunks_exact(stride)
        .map(|px| px.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok((rows, layout))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let (sizes, payload) = header(bytes, LABEL_MAGIC, 1)?;
    check_payload(payload, payload_len(&sizes)?)?;
    Ok(payload.iter().map(|&b| b as usize).collect())
}

/// Loads an image/label IDX pair. The class count is one more than the largest label.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (rows, layout) = parse_idx_images(&read_maybe_gzipped(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_maybe_gzipped(labels_path.as_ref())?)?;
    if rows.len() != labels.len() {
        return Err(DataError::CountMismatch {
            images: rows.len(),
            labels: labels.len(),
        }
        .into());
    }
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    Dataset::new(rows, labels, classes)?.with_image_layout(layout)
}
