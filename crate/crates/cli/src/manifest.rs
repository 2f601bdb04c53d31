use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Written next to the outputs of every run. `replay` is the argument list
/// (without `--out`) that regenerates the outputs byte for byte; wall time
/// lives only here so the outputs themselves stay reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub replay: Vec<String>,
    pub scenario: Option<FileRecord>,
    pub inputs: Vec<FileRecord>,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub exit_code: i32,
    pub error: Option<String>,
    pub outputs: Vec<FileRecord>,
}

pub fn record_file(path: &Path) -> Result<FileRecord, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    Ok(FileRecord { path: path.display().to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

/// Output directory that remembers what was written to it.
pub struct Outputs {
    dir: PathBuf,
    pub files: Vec<FileRecord>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileRecord { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Compute(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(&self, manifest: &RunManifest) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Compute(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
