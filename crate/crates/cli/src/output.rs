use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Artifact names `<command>-<seed>-<timestamp>[.<part>].<ext>` in one directory.
pub struct Artifacts {
    dir: PathBuf,
    stem: String,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, seed: u64, stamp: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), stem: format!("{command}-{seed}-{stamp}"), written: Vec::new() })
    }

    pub fn path(&self, part: Option<&str>, ext: &str) -> PathBuf {
        let name = match part {
            Some(p) => format!("{}.{p}.{ext}", self.stem),
            None => format!("{}.{ext}", self.stem),
        };
        self.dir.join(name)
    }

    /// Streams into a new artifact file.
    pub fn with_file<F>(&mut self, part: Option<&str>, ext: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Box<dyn std::error::Error>>,
    {
        let path = self.path(part, ext);
        let io = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(|e| io(&e))?);
        f(&mut w).map_err(|e| io(&e))?;
        w.flush().map_err(|e| io(&e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, part: Option<&str>, value: &T) -> Result<(), CliError> {
        self.with_file(part, "json", |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn text(&mut self, part: Option<&str>, ext: &str, body: &str) -> Result<(), CliError> {
        self.with_file(part, ext, |w| Ok(w.write_all(body.as_bytes())?))
    }
}
