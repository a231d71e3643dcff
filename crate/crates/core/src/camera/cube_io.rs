//! On-disk cube format.
//!
//! A cube file is one line of JSON followed by the raw payload:
//!
//! ```text
//! {"format":"hyve-cube","version":1,"height":H,"width":W,"channels":C,"dtype":"f64le",
//!  "camera":"name","wavelengths":[...],"placeholder_from":null,"labels":"file.labels"}\n
//! <H·W·C little-endian f64 values, pixel-major (h, w, c)>
//! ```
//!
//! Labels live in a separate file of `H·W` little-endian `u32` values whose
//! name, relative to the cube's directory, is stored in the header.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_wavelengths, CameraDescriptor, HyperCube};
use crate::error::{HyveError, Result};

pub const CUBE_FORMAT: &str = "hyve-cube";
pub const CUBE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CubeHeader {
    format: String,
    version: u32,
    height: usize,
    width: usize,
    channels: usize,
    dtype: String,
    camera: String,
    wavelengths: Vec<f64>,
    placeholder_from: Option<usize>,
    labels: Option<String>,
}

/// Writes `cube` to `path`. When the cube carries labels, `labels_file`
/// (a bare file name) receives them next to the cube and is referenced
/// from the header.
pub fn write_cube(path: &Path, cube: &HyperCube, labels_file: Option<&str>) -> Result<()> {
    let labels_ref = match (cube.labels(), labels_file) {
        (Some(labels), Some(name)) => {
            if Path::new(name)
                .file_name()
                .map(|f| f != name)
                .unwrap_or(true)
            {
                return Err(HyveError::Input(format!(
                    "labels file '{name}' must be a bare file name"
                )));
            }
            write_labels(&path.with_file_name(name), labels)?;
            Some(name.to_string())
        }
        (None, Some(_)) => return Err(HyveError::Input("cube has no labels to write".into())),
        _ => None,
    };
    let header = CubeHeader {
        format: CUBE_FORMAT.into(),
        version: CUBE_VERSION,
        height: cube.height(),
        width: cube.width(),
        channels: cube.channels(),
        dtype: "f64le".into(),
        camera: cube.camera().name().into(),
        wavelengths: cube.camera().wavelengths().to_vec(),
        placeholder_from: cube.camera().placeholder_from(),
        labels: labels_ref,
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| HyveError::Input(e.to_string()))?;
    bytes.push(b'\n');
    bytes.reserve(cube.data().len() * 8);
    for v in cube.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn read_cube(path: &Path) -> Result<HyperCube> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| HyveError::format("header", "no newline terminating the header line"))?;
    let header: CubeHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| HyveError::format(format!("header column {}", e.column()), e.to_string()))?;
    if header.format != CUBE_FORMAT {
        return Err(HyveError::format(
            "header field 'format'",
            format!("expected '{CUBE_FORMAT}', found '{}'", header.format),
        ));
    }
    if header.version != CUBE_VERSION {
        return Err(HyveError::format(
            "header field 'version'",
            format!("unsupported version {}", header.version),
        ));
    }
    if header.dtype != "f64le" {
        return Err(HyveError::format(
            "header field 'dtype'",
            format!("unsupported dtype '{}'", header.dtype),
        ));
    }
    if header.channels != header.wavelengths.len() {
        return Err(HyveError::format(
            "header field 'channels'",
            format!(
                "{} channels but {} wavelengths",
                header.channels,
                header.wavelengths.len()
            ),
        ));
    }
    if header.height == 0 || header.width == 0 {
        return Err(HyveError::format(
            "header field 'height'/'width'",
            "cube is empty",
        ));
    }
    validate_wavelengths(&header.wavelengths)
        .map_err(|(i, msg)| HyveError::format(format!("header wavelengths[{i}]"), msg))?;
    let camera = CameraDescriptor::with_placeholders(
        header.camera,
        header.wavelengths,
        header.placeholder_from,
    )
    .map_err(|e| HyveError::format("header field 'placeholder_from'", e.to_string()))?;

    let payload = &bytes[newline + 1..];
    let count = header.height * header.width * header.channels;
    if payload.len() != count * 8 {
        return Err(HyveError::format(
            format!("byte {}", newline + 1 + payload.len().min(count * 8)),
            format!(
                "payload holds {} bytes, expected {}",
                payload.len(),
                count * 8
            ),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        if !v.is_finite() {
            return Err(HyveError::format(
                format!("byte {}", newline + 1 + 8 * i),
                format!("value {v} is not finite"),
            ));
        }
        data.push(v);
    }
    let labels = match header.labels {
        Some(name) => Some(read_labels(
            &path.with_file_name(name),
            header.height * header.width,
        )?),
        None => None,
    };
    HyperCube::new(header.height, header.width, data, camera, labels)
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads exactly `expected` labels.
pub fn read_labels(path: &Path, expected: usize) -> Result<Vec<u32>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 4 {
        return Err(HyveError::format(
            format!("{} byte {}", path.display(), bytes.len().min(expected * 4)),
            format!(
                "label file holds {} bytes, expected {}",
                bytes.len(),
                expected * 4
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> HyperCube {
        let cam = CameraDescriptor::linspace("c", 400.0, 700.0, 4).unwrap();
        let data: Vec<f64> = (0..2 * 3 * 4)
            .map(|i| (i as f64 * 0.37).sin() / 3.0)
            .collect();
        HyperCube::new(2, 3, data, cam, Some(vec![0, 1, 2, 0, 1, 2])).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.cube");
        let cube = sample();
        write_cube(&path, &cube, Some("a.labels")).unwrap();
        let back = read_cube(&path).unwrap();
        assert_eq!(back, cube);
        let first = fs::read(&path).unwrap();
        write_cube(&path, &back, Some("a.labels")).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn truncated_payload_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.cube");
        write_cube(&path, &sample(), None).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        match read_cube(&path) {
            Err(HyveError::Format { position, message }) => {
                assert!(position.starts_with("byte "), "{position}");
                assert!(message.contains("expected"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
