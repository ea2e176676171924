//! Run manifests: the exact argv, resolved settings and SHA-256 of every
//! file read or written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    argv: Vec<String>,
    settings: BTreeMap<String, String>,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

/// Tracks one command's artifacts. Outputs go under `out`.
pub struct Run {
    command: &'static str,
    out: PathBuf,
    settings: BTreeMap<String, String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn hash_file(path: &Path) -> Result<FileHash> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileHash {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

impl Run {
    pub fn new(command: &'static str, out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Run {
            command,
            out: out.to_path_buf(),
            settings: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) {
        self.settings.insert(key.to_string(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) {
        if path.is_file() && !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Registers the header, data and annotation files of a record.
    pub fn record_inputs(&mut self, base: &Path, data_file: &str) {
        let hea = base.with_extension("hea");
        let dir = hea.parent().unwrap_or(Path::new("."));
        self.input(&hea);
        self.input(&dir.join(data_file));
        self.input(&hea.with_extension("atr"));
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Records a file some other writer produced under the output directory.
    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    /// Writes `<command>.manifest.toml` and returns its path.
    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            settings: self.settings,
            inputs: self.inputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
        };
        let path = self.out.join(format!("{}.manifest.toml", self.command));
        let text = toml::to_string(&manifest).context("serializing manifest")?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
