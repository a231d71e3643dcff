//! Model checkpoints: one JSON header line naming the configuration and the
//! parameter buffers, followed by the buffers as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraDescriptor, Preprocessing};
use crate::error::{HyveError, Result};
use crate::nets::{Model, ModelConfig};

pub const CHECKPOINT_FORMAT: &str = "hyve-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BufferEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    preprocessing: Preprocessing,
    #[serde(default)]
    cameras: Vec<CameraDescriptor>,
    params: Vec<BufferEntry>,
}

/// A trained model together with the preprocessing its inputs need.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub preprocessing: Preprocessing,
    /// Cameras of the training data; empty when unknown.
    pub cameras: Vec<CameraDescriptor>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = self.model.parameters();
        let header = Header {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.model.config().clone(),
            preprocessing: self.preprocessing.clone(),
            cameras: self.cameras.clone(),
            params: params
                .iter()
                .map(|p| BufferEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                })
                .collect(),
        };
        let mut bytes = serde_json::to_vec(&header).map_err(|e| HyveError::Input(e.to_string()))?;
        bytes.push(b'\n');
        for p in &params {
            for v in p.value.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| HyveError::format("header", "no newline terminating the header line"))?;
        let header: Header = serde_json::from_slice(&bytes[..newline]).map_err(|e| {
            HyveError::format(format!("header column {}", e.column()), e.to_string())
        })?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(HyveError::format(
                "header field 'format'",
                format!("expected '{CHECKPOINT_FORMAT}', found '{}'", header.format),
            ));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(HyveError::format(
                "header field 'version'",
                format!("unsupported version {}", header.version),
            ));
        }
        let mut model = Model::build(&header.config)
            .map_err(|e| HyveError::format("header field 'config'", e.to_string()))?;
        let expected: Vec<(String, Vec<usize>)> = model
            .parameters()
            .iter()
            .map(|p| (p.name.clone(), p.value.shape().to_vec()))
            .collect();
        if expected.len() != header.params.len() {
            return Err(HyveError::format(
                "header field 'params'",
                format!(
                    "configuration has {} buffers, header lists {}",
                    expected.len(),
                    header.params.len()
                ),
            ));
        }
        for (i, ((name, shape), entry)) in expected.iter().zip(&header.params).enumerate() {
            if *name != entry.name || *shape != entry.shape {
                return Err(HyveError::format(
                    format!("header params[{i}]"),
                    format!(
                        "expected {name} {shape:?}, found {} {:?}",
                        entry.name, entry.shape
                    ),
                ));
            }
        }
        let total: usize = expected
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum();
        let payload = &bytes[newline + 1..];
        if payload.len() != total * 8 {
            return Err(HyveError::format(
                format!("byte {}", newline + 1 + payload.len().min(total * 8)),
                format!(
                    "payload holds {} bytes, expected {}",
                    payload.len(),
                    total * 8
                ),
            ));
        }
        let mut offset = 0;
        for (i, t) in model.parameters_mut().into_iter().enumerate() {
            for v in t.data_mut() {
                let at = newline + 1 + offset;
                let value =
                    f64::from_le_bytes(payload[offset..offset + 8].try_into().expect("8 bytes"));
                if !value.is_finite() {
                    return Err(HyveError::format(
                        format!("byte {at}"),
                        format!("non-finite value in buffer {}", expected[i].0),
                    ));
                }
                *v = value;
                offset += 8;
            }
        }
        Ok(Checkpoint {
            model,
            preprocessing: header.preprocessing,
            cameras: header.cameras,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{Alignment, Normalization};
    use crate::nets::FirstLayerKind;

    fn model() -> Model {
        let mut c = ModelConfig::new(FirstLayerKind::HyvePlusPlus, 3);
        c.widths = vec![4, 3];
        c.seed = 5;
        let mut m = Model::build(&c).unwrap();
        for (i, t) in m.parameters_mut().into_iter().enumerate() {
            for (j, v) in t.data_mut().iter_mut().enumerate() {
                *v += (i * 31 + j) as f64 * 1e-3 + 1.0 / 3.0;
            }
        }
        m
    }

    #[test]
    fn byte_stable_round_trip() {
        let ck = Checkpoint {
            model: model(),
            preprocessing: Preprocessing::identity(),
            cameras: vec![CameraDescriptor::corning()],
        };
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        for (a, b) in back.model.parameters().iter().zip(ck.model.parameters()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn truncated_and_corrupt_headers() {
        let bytes = Checkpoint {
            model: model(),
            preprocessing: Preprocessing::new(
                Normalization::Snv,
                Alignment::ZeroPad { channels: 9 },
            ),
            cameras: Vec::new(),
        }
        .to_bytes()
        .unwrap();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(HyveError::Format { .. })
        ));
        let mut bad = bytes.clone();
        bad[3] = b'#';
        match Checkpoint::from_bytes(&bad) {
            Err(HyveError::Format { position, .. }) => assert!(position.starts_with("header")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Checkpoint::from_bytes(b"no newline").is_err());
    }
}
