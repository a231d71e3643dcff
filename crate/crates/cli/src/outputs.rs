use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Files and directories created by one command. Unless [`Outputs::commit`]
/// is called, dropping the set removes everything it created, so a failed
/// command leaves no partial results behind.
#[derive(Default)]
pub struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs::default()
    }

    /// Creates `dir` and any missing parents.
    pub fn dir(&mut self, dir: &Path) -> Result<(), CliError> {
        if dir.is_file() {
            return Err(CliError::Usage(format!(
                "output directory {} is an existing file",
                dir.display()
            )));
        }
        let missing: Vec<PathBuf> = dir
            .ancestors()
            .take_while(|a| !a.as_os_str().is_empty() && !a.exists())
            .map(Path::to_path_buf)
            .collect();
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))?;
        self.dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    /// Records a file some other writer is about to create.
    pub fn claim(&mut self, path: &Path) {
        self.files.push(path.to_path_buf());
    }

    pub fn write(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        self.claim(path);
        fs::write(path, bytes)
            .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let root = tempfile::tempdir().unwrap();
        let nested = root.path().join("a/b");
        {
            let mut out = Outputs::new();
            out.dir(&nested).unwrap();
            out.write(&nested.join("x.csv"), "1\n").unwrap();
        }
        assert!(!root.path().join("a").exists());
        let mut out = Outputs::new();
        out.dir(&nested).unwrap();
        out.write(&nested.join("x.csv"), "1\n").unwrap();
        out.commit();
        assert!(nested.join("x.csv").is_file());
    }
}
