//! Output sinks: atomic file writes, stdout, and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub outputs: Vec<String>,
    pub timestamp: String,
}

/// Collects everything that determines a run's result, and the files it wrote.
pub struct Run {
    command: String,
    hasher: Sha256,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        Self { command: command.to_string(), hasher, outputs: Vec::new() }
    }

    /// Feed a labelled chunk into the config digest.
    pub fn digest(&mut self, label: &str, bytes: &[u8]) {
        self.hasher.update((label.len() as u64).to_le_bytes());
        self.hasher.update(label.as_bytes());
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    /// Read an input file and fold its contents into the digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.digest(&path.display().to_string(), text.as_bytes());
        Ok(text)
    }

    pub fn config_hash(&self) -> String {
        self.hasher.clone().finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Write to `path`, or stdout when `None`.
    pub fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> Result<()> {
        match path {
            Some(p) => {
                write_atomic(p, bytes)?;
                self.outputs.push(p.to_path_buf());
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
            }
        }
        Ok(())
    }

    /// Manifest next to the first output file; nothing when all went to stdout.
    pub fn finish(self) -> Result<Option<PathBuf>> {
        let Some(first) = self.outputs.first() else { return Ok(None) };
        let mut name = first.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        let path = first.with_file_name(name);
        let manifest = RunManifest {
            config_hash: self.config_hash(),
            command: self.command,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(Some(path))
    }
}

/// Temp file in the target directory, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().with_context(|| format!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        anyhow::Error::new(e).context(format!("writing {}", path.display()))
    })
}
