//! Experiment-scoped output directory that cleans up after a failed run.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub struct OutputDir {
    dir: PathBuf,
    created: Vec<PathBuf>,
    made_dir: bool,
    keep: bool,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let made_dir = !dir.exists();
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created: Vec::new(),
            made_dir,
            keep: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))?;
        self.created.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Other(format!("cannot serialise {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Keep everything written so far.
    pub fn commit(mut self) -> Vec<PathBuf> {
        self.keep = true;
        std::mem::take(&mut self.created)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.keep {
            return;
        }
        for f in &self.created {
            let _ = std::fs::remove_file(f);
        }
        if self.made_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}
