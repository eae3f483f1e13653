//! Run directories, manifests and artifact writers.
//!
//! Artifacts other than the manifest carry no timing or host information, so
//! re-running the same command reproduces them byte for byte; the manifest is
//! the one file that records wall-clock.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimize::{HistoryRow, MinimizeResult};

/// Manifest describing the command that created a run directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub subcommand: String,
    /// Flattened parameter snapshot (flags after config-file merging).
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub threads: usize,
    pub artifacts: Vec<String>,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, params: BTreeMap<String, String>, seed: u64, threads: usize) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            params,
            seed,
            threads,
            artifacts: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn add_artifact(&mut self, name: &str) {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
    }

    /// True when the manifest describes the same command (everything except
    /// artifacts and wall clock).
    pub fn same_run(&self, other: &RunManifest) -> bool {
        self.subcommand == other.subcommand && self.params == other.params && self.seed == other.seed
    }
}

/// A run output directory with exactly one manifest.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Opens (creating if needed) a directory for `manifest`'s run. Refuses a
    /// directory already owned by a different run.
    pub fn create(path: &Path, manifest: &RunManifest) -> Result<Self> {
        std::fs::create_dir_all(path)?;
        let mpath = path.join("manifest.json");
        if mpath.exists() {
            let existing: RunManifest = serde_json::from_str(&std::fs::read_to_string(&mpath)?)?;
            if !existing.same_run(manifest) {
                return Err(Error::Domain(format!(
                    "{} already belongs to a different run ({} vs {})",
                    path.display(),
                    existing.subcommand,
                    manifest.subcommand
                )));
            }
        }
        Ok(RunDir { path: path.to_path_buf() })
    }

    /// Opens an existing run directory and loads its manifest.
    pub fn open(path: &Path) -> Result<(Self, RunManifest)> {
        let mpath = path.join("manifest.json");
        let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(&mpath)?)?;
        Ok((RunDir { path: path.to_path_buf() }, manifest))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<()> {
        write_json(&self.file("manifest.json"), manifest)
    }
}

/// Pretty JSON with a trailing newline; field order fixed by struct order.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Minimization result as persisted to `result.json` (no timing fields).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeResultJson {
    pub p: f64,
    pub level: u32,
    pub boundary: String,
    pub init: String,
    pub energy: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub min_j: f64,
    pub converged: bool,
}

impl MinimizeResultJson {
    pub fn from_result(
        res: &MinimizeResult,
        p: f64,
        level: u32,
        boundary: &str,
        init: &str,
    ) -> Self {
        MinimizeResultJson {
            p,
            level,
            boundary: boundary.to_string(),
            init: init.to_string(),
            energy: res.energy,
            iterations: res.iterations,
            final_grad_norm: res.final_grad_norm,
            min_j: res.min_j,
            converged: res.converged,
        }
    }
}

/// `iter,energy,grad_norm,min_J` rows.
pub fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut out = String::from("iter,energy,grad_norm,min_J\n");
    for row in history {
        out.push_str(&format!("{},{},{},{}\n", row.iter, row.energy, row.grad_norm, row.min_j));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `x,y` rows of a level curve.
pub fn write_curve_csv(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("x,y\n");
    for (x, y) in samples {
        out.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `re_bary,im_bary,re_phi,im_phi` rows of a Hopf field.
pub fn write_hopf_csv(path: &Path, hopf: &crate::hopf::HopfField) -> Result<()> {
    let mut out = String::from("re_bary,im_bary,re_phi,im_phi\n");
    for (b, p) in hopf.barycenters.iter().zip(&hopf.phi) {
        out.push_str(&format!("{},{},{},{}\n", b.re, b.im, p.re, p.im));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One entry of the diagnose report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnoseEntry {
    pub test: String,
    pub field_seed: u64,
    pub residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dir_ownership() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run1");
        let mut m1 = RunManifest::new("minimize", BTreeMap::new(), 7, 1);
        let rd = RunDir::create(&path, &m1).unwrap();
        m1.add_artifact("map.txt");
        rd.write_manifest(&m1).unwrap();

        // Same run may reopen; a different one may not.
        assert!(RunDir::create(&path, &m1).is_ok());
        let m2 = RunManifest::new("mesh", BTreeMap::new(), 7, 1);
        assert!(RunDir::create(&path, &m2).is_err());

        let (_, loaded) = RunDir::open(&path).unwrap();
        assert!(loaded.same_run(&m1));
        assert_eq!(loaded.artifacts, vec!["map.txt".to_string()]);
    }

    #[test]
    fn artifact_dedup() {
        let mut m = RunManifest::new("minimize", BTreeMap::new(), 0, 1);
        m.add_artifact("a.json");
        m.add_artifact("a.json");
        assert_eq!(m.artifacts.len(), 1);
    }
}
