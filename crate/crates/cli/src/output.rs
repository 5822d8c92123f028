//! Buffered output files, written only once a command has finished.

use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    /// Writes every file under `dir` through a temporary name and a rename.
    /// On failure, files written so far are removed.
    pub fn commit(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut done: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (name, bytes) in &self.files {
                let tmp = dir.join(format!(".{name}.partial"));
                let target = dir.join(name);
                fs::write(&tmp, bytes).inspect_err(|_| {
                    let _ = fs::remove_file(&tmp);
                })?;
                fs::rename(&tmp, &target)?;
                done.push(target);
            }
            Ok(())
        })();
        if result.is_err() {
            for p in done {
                let _ = fs::remove_file(p);
            }
        }
        result
    }
}
