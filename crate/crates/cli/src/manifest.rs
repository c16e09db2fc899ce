//! Run manifests: resolved config, seed and content hashes of inputs and outputs.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Clone, Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Non-file inputs such as feed URLs.
    pub sources: Vec<String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// Wall-clock time of writing; the only field that differs between
    /// otherwise identical runs.
    pub written_unix_s: u64,
}

pub fn hash_file(path: &Path) -> Result<FileHash> {
    let mut f = std::fs::File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).with_context(|| format!("hashing {}", path.display()))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        bytes += n as u64;
    }
    let hex = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(FileHash {
        path: path.display().to_string(),
        sha256: hex,
        bytes,
    })
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            tool: "hftmm",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            sources: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            written_unix_s: 0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    /// Hashes `outputs` and writes the manifest to `to`.
    pub fn write(mut self, outputs: &[PathBuf], to: &Path) -> Result<()> {
        for p in outputs {
            self.outputs.push(hash_file(p)?);
        }
        self.written_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(to, text + "\n").with_context(|| format!("writing manifest {}", to.display()))
    }
}

/// Regular files directly inside `dir`, sorted, excluding the manifest.
pub fn files_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != MANIFEST))
        .collect();
    v.sort();
    Ok(v)
}

pub const MANIFEST: &str = "manifest.json";

/// Manifest path for a single-file output: `<file>.manifest.json`.
pub fn beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    file.with_file_name(name)
}
