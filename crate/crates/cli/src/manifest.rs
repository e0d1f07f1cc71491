//! Output inventory with checksums, per-phase timings and a config echo.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub name: String,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// The effective configuration, as TOML.
    pub config: String,
    pub phases: Vec<PhaseTiming>,
    pub files: Vec<FileEntry>,
}

/// Records phase wall times.
#[derive(Debug, Default)]
pub struct Timer {
    phases: Vec<PhaseTiming>,
}

impl Timer {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.phases.push(PhaseTiming {
            name: name.to_string(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    pub fn phases(&self) -> &[PhaseTiming] {
        &self.phases
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root)?.to_path_buf());
        }
    }
    Ok(())
}

/// Every file under `dir` except the manifest itself, sorted by path.
pub fn inventory(dir: &Path) -> Result<Vec<FileEntry>> {
    let mut paths = Vec::new();
    walk(dir, dir, &mut paths)?;
    let mut files = Vec::new();
    for rel in paths {
        let name = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        if name == MANIFEST_FILE {
            continue;
        }
        let full = dir.join(&rel);
        files.push(FileEntry {
            bytes: std::fs::metadata(&full)?.len(),
            sha256: sha256_file(&full)?,
            path: name,
        });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}

/// Inventory `dir` and write `manifest.json` into it.
pub fn write_manifest(dir: &Path, command: &str, seed: u64, config: &str, timer: &Timer) -> Result<RunManifest> {
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: config.to_string(),
        phases: timer.phases().to_vec(),
        files: inventory(dir)?,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Check the manifest against the files on disk; returns the mismatches.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let actual = inventory(dir)?;
    let mut problems = Vec::new();
    for f in &manifest.files {
        match actual.iter().find(|a| a.path == f.path) {
            None => problems.push(format!("missing {}", f.path)),
            Some(a) if a.sha256 != f.sha256 => problems.push(format!("checksum mismatch {}", f.path)),
            Some(_) => {}
        }
    }
    for a in &actual {
        if !manifest.files.iter().any(|f| f.path == a.path) {
            problems.push(format!("unlisted {}", a.path));
        }
    }
    Ok(problems)
}
