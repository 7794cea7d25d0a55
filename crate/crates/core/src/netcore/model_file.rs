//! The FGN model file.
//!
//! ```text
//! bytes 0..8    magic "FGNET01\n"
//! bytes 8..12   header length n, u32 little-endian
//! bytes 12..12+n UTF-8 JSON header
//!               {"input_width":…,"class_count":…,"layers":[{"in":…,"out":…,"act":"relu"|"id"}…],
//!                "dtype":"f64le","param_count":…}
//! then          param_count × 8 bytes, f64 little-endian, in parameter-vector order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayerSpec, NetworkSpec, ParameterVector};
use crate::error::{Error, FormatError, Result};

pub const MAGIC: &[u8; 8] = b"FGNET01\n";
const DTYPE: &str = "f64le";

#[derive(Serialize, Deserialize)]
struct Header {
    input_width: usize,
    class_count: usize,
    layers: Vec<LayerHeader>,
    dtype: String,
    param_count: usize,
}

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    #[serde(rename = "in")]
    in_width: usize,
    #[serde(rename = "out")]
    out_width: usize,
    act: Activation,
}

pub fn encode_model(spec: &NetworkSpec, params: &ParameterVector) -> Result<Vec<u8>> {
    spec.check_params(params)?;
    let header = Header {
        input_width: spec.input_width(),
        class_count: spec.class_count(),
        layers: spec
            .layers()
            .iter()
            .map(|l| LayerHeader {
                in_width: l.in_width,
                out_width: l.out_width,
                act: l.activation,
            })
            .collect(),
        dtype: DTYPE.to_owned(),
        param_count: params.len(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let header_len = u32::try_from(json.len())
        .map_err(|_| FormatError::Header("header longer than 4 GiB".into()))?;

    let mut out = Vec::with_capacity(12 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<(NetworkSpec, ParameterVector)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(FormatError::MagicMismatch {
            found: bytes[..bytes.len().min(MAGIC.len())].to_vec(),
        }
        .into());
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 4 {
        return Err(FormatError::Truncated {
            section: "header length",
            expected: 4,
            found: rest.len(),
        }
        .into());
    }
    let header_len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
    let rest = &rest[4..];
    if rest.len() < header_len {
        return Err(FormatError::Truncated {
            section: "header",
            expected: header_len,
            found: rest.len(),
        }
        .into());
    }
    let header: Header = serde_json::from_slice(&rest[..header_len])
        .map_err(|e| FormatError::Header(e.to_string()))?;
    if header.dtype != DTYPE {
        return Err(FormatError::Header(format!("unsupported dtype {:?}", header.dtype)).into());
    }
    let layers = header
        .layers
        .iter()
        .map(|l| DenseLayerSpec::new(l.in_width, l.out_width, l.act))
        .collect();
    let spec = NetworkSpec::new(header.input_width, header.class_count, layers)
        .map_err(|e| FormatError::Header(e.to_string()))?;
    if header.param_count != spec.param_count() {
        return Err(FormatError::LengthMismatch {
            declared: header.param_count,
            actual: spec.param_count(),
        }
        .into());
    }

    let blob = &rest[header_len..];
    let expected = header.param_count * 8;
    if blob.len() < expected {
        return Err(FormatError::Truncated {
            section: "parameters",
            expected,
            found: blob.len(),
        }
        .into());
    }
    if blob.len() > expected {
        return Err(FormatError::LengthMismatch {
            declared: header.param_count,
            actual: blob.len() / 8,
        }
        .into());
    }
    let values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = ParameterVector::new(values)?;
    Ok((spec, params))
}

pub fn save_model(
    spec: &NetworkSpec,
    params: &ParameterVector,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(spec, params)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(NetworkSpec, ParameterVector)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (NetworkSpec, ParameterVector) {
        let spec: NetworkSpec = "3-4-2".parse().unwrap();
        let values = (0..spec.param_count())
            .map(|i| (i as f64 * 0.37).sin() * 1e-3 + f64::EPSILON * i as f64)
            .collect();
        (spec, ParameterVector::new(values).unwrap())
    }

    fn format_err(err: Error) -> FormatError {
        match err {
            Error::Format(f) => f,
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (spec, params) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fgn");
        save_model(&spec, &params, &path).unwrap();
        let (spec2, params2) = load_model(&path).unwrap();
        assert_eq!(spec, spec2);
        let bits =
            |p: &ParameterVector| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&params), bits(&params2));
    }

    #[test]
    fn header_layout() {
        let spec: NetworkSpec = "2-2".parse().unwrap();
        let params = ParameterVector::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let bytes = encode_model(&spec, &params).unwrap();
        assert_eq!(&bytes[..8], b"FGNET01\n");
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[12..12 + n]).unwrap();
        assert_eq!(
            header,
            r#"{"input_width":2,"class_count":2,"layers":[{"in":2,"out":2,"act":"id"}],"dtype":"f64le","param_count":6}"#
        );
        assert_eq!(bytes.len(), 12 + n + 48);
        assert_eq!(&bytes[12 + n..12 + n + 8], &1.0f64.to_le_bytes());
    }

    #[test]
    fn wrong_magic() {
        let (spec, params) = sample();
        let mut bytes = encode_model(&spec, &params).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            format_err(decode_model(&bytes).unwrap_err()),
            FormatError::MagicMismatch { .. }
        ));
        assert!(matches!(
            format_err(decode_model(b"FGN").unwrap_err()),
            FormatError::MagicMismatch { .. }
        ));
    }

    #[test]
    fn truncated_blob() {
        let (spec, params) = sample();
        let bytes = encode_model(&spec, &params).unwrap();
        let err = format_err(decode_model(&bytes[..bytes.len() - 3]).unwrap_err());
        assert!(matches!(
            err,
            FormatError::Truncated {
                section: "parameters",
                ..
            }
        ));
        let err = format_err(decode_model(&bytes[..10]).unwrap_err());
        assert!(matches!(
            err,
            FormatError::Truncated {
                section: "header length",
                ..
            }
        ));
        let err = format_err(decode_model(&bytes[..20]).unwrap_err());
        assert!(matches!(
            err,
            FormatError::Truncated {
                section: "header",
                ..
            }
        ));
    }

    #[test]
    fn header_and_blob_disagree() {
        let (spec, params) = sample();
        let mut bytes = encode_model(&spec, &params).unwrap();
        bytes.extend_from_slice(&0.0f64.to_le_bytes());
        assert!(matches!(
            format_err(decode_model(&bytes).unwrap_err()),
            FormatError::LengthMismatch { .. }
        ));

        let header = br#"{"input_width":2,"class_count":2,"layers":[{"in":2,"out":2,"act":"id"}],"dtype":"f64le","param_count":5}"#;
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&[0u8; 40]);
        assert_eq!(
            format_err(decode_model(&bytes).unwrap_err()),
            FormatError::LengthMismatch {
                declared: 5,
                actual: 6
            }
        );
    }
}
