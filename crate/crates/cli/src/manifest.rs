//! Run manifests: one plain-text key/value file per run recording the
//! command, its inputs, and a checksum for every artifact, so a rerun
//! can be verified byte-for-byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::Failure;

pub struct RunManifest {
    command: String,
    scenario: String,
    seed: u64,
    horizon: usize,
    out_dir: PathBuf,
    extra: Vec<(String, String)>,
    artifacts: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, scenario: &str, seed: u64, horizon: usize, out_dir: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            scenario: scenario.to_string(),
            seed,
            horizon,
            out_dir: out_dir.to_path_buf(),
            extra: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Record an extra key (containment checks, statuses, ...).
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.to_string(), value.to_string()));
    }

    /// Write an artifact into the run directory and record its checksum.
    pub fn write_artifact(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        let digest = Sha256::digest(contents.as_bytes());
        let hex: String = digest.iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        });
        self.artifacts.push((name.to_string(), hex));
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "horizon: {}", self.horizon);
        let _ = writeln!(out, "version: {}", env!("CARGO_PKG_VERSION"));
        for (key, value) in &self.extra {
            let _ = writeln!(out, "{key}: {value}");
        }
        self.artifacts.sort();
        for (name, hex) in &self.artifacts {
            let _ = writeln!(out, "artifact: {name} sha256 {hex}");
        }
        let path = self.out_dir.join("manifest.txt");
        fs::write(&path, out)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
    }
}

/// Resolve the output directory: --out, then GPOBS_OUT_DIR, then
/// ./gpobs-out, with a per-command subdirectory; created if absent.
pub fn resolve_out_dir(explicit: Option<&Path>, command: &str) -> Result<PathBuf, Failure> {
    let dir = match explicit {
        Some(dir) => dir.to_path_buf(),
        None => {
            let root = std::env::var_os("GPOBS_OUT_DIR")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("gpobs-out"));
            root.join(command)
        }
    };
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}
