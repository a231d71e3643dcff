//! The dataset manifest written by `gen-data` and read by every other
//! command. Cube paths are relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use hyve::camera::{read_cube, CameraDescriptor, HyperCube};
use hyve::train::{SyntheticTask, TaskData};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FORMAT: &str = "hyve-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub camera: String,
    pub split: Split,
    pub cube: String,
    pub labels: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub classes: usize,
    /// The generator settings, kept for provenance.
    pub task: SyntheticTask,
    pub cameras: Vec<CameraDescriptor>,
    pub entries: Vec<Entry>,
}

/// A manifest together with the directory its paths are relative to.
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub root: PathBuf,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn format_error(path: &Path, position: String, message: impl Into<String>) -> CliError {
    CliError::Failed(format!(
        "{}: format error at {position}: {}",
        path.display(),
        message.into()
    ))
}

pub fn load(path: &Path) -> Result<LoadedManifest, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        format_error(
            path,
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
        return Err(format_error(
            path,
            "field 'format'".into(),
            format!(
                "expected {MANIFEST_FORMAT} version {MANIFEST_VERSION}, found {} version {}",
                manifest.format, manifest.version
            ),
        ));
    }
    for (i, e) in manifest.entries.iter().enumerate() {
        if !manifest.cameras.iter().any(|c| c.name() == e.camera) {
            return Err(format_error(
                path,
                format!("entries[{i}]"),
                format!("camera '{}' is not listed under 'cameras'", e.camera),
            ));
        }
    }
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedManifest { manifest, root })
}

impl LoadedManifest {
    pub fn camera(&self, name: &str) -> Option<&CameraDescriptor> {
        self.manifest.cameras.iter().find(|c| c.name() == name)
    }

    /// Cubes of `split`, in manifest camera order, optionally for one camera.
    pub fn cubes(&self, split: Split, camera: Option<&str>) -> Result<Vec<HyperCube>, CliError> {
        let mut out = Vec::new();
        for cam in &self.manifest.cameras {
            if camera.is_some_and(|c| c != cam.name()) {
                continue;
            }
            for e in self
                .manifest
                .entries
                .iter()
                .filter(|e| e.split == split && e.camera == cam.name())
            {
                let path = self.root.join(&e.cube);
                let cube = read_cube(&path)
                    .map_err(|err| CliError::Failed(format!("{}: {err}", path.display())))?;
                if cube.camera().wavelengths() != cam.wavelengths() {
                    return Err(CliError::Failed(format!(
                        "{}: wavelengths differ from camera '{}' in the manifest",
                        path.display(),
                        cam.name()
                    )));
                }
                if cube.labels().is_none() {
                    return Err(CliError::Failed(format!(
                        "{}: cube carries no labels",
                        path.display()
                    )));
                }
                out.push(cube);
            }
        }
        Ok(out)
    }

    pub fn task_data(&self) -> Result<TaskData, CliError> {
        let train = self.cubes(Split::Train, None)?;
        let test = self.cubes(Split::Test, None)?;
        if train.len() != self.manifest.cameras.len() || test.len() != self.manifest.cameras.len() {
            return Err(CliError::Usage(
                "experiments need exactly one train and one test cube per camera".into(),
            ));
        }
        Ok(TaskData {
            cameras: self.manifest.cameras.clone(),
            train,
            test,
            classes: self.manifest.classes,
        })
    }
}
