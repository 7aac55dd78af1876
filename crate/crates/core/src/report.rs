//! CSV tables, gnuplot data files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

pub const MANIFEST_FORMAT: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column whitespace data with a commented header, as gnuplot reads it.
pub fn write_dat(path: &Path, config_hash: &str, columns: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# config_sha256 {config_hash}\n# {} {}\n",
        columns[0], columns[1]
    ));
    for (x, y) in points {
        out.push_str(&format!("{x:.17e} {y:.17e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation; every artifact carries the config hash
/// through this file.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub format: u32,
    pub command: String,
    pub crate_version: String,
    pub checkpoint_format: u32,
    pub config_sha256: String,
    pub seed: u64,
    pub config: String,
    pub artifacts: Vec<Artifact>,
    pub outcome: String,
}

/// Collects artifacts written into one output directory.
#[derive(Debug)]
pub struct Reporter {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl Reporter {
    pub fn new(dir: &Path, command: &str, config_text: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Reporter {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                format: MANIFEST_FORMAT,
                command: command.to_string(),
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                checkpoint_format: crate::checkpoint::VERSION,
                config_sha256: sha256_hex(config_text.as_bytes()),
                seed,
                config: config_text.to_string(),
                artifacts: Vec::new(),
                outcome: String::new(),
            },
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.manifest.config_sha256
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Register a file already written under the output directory.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.manifest.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        write_csv(&self.path(name), rows)?;
        self.record(name)
    }

    pub fn dat(&mut self, name: &str, columns: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
        let hash = self.manifest.config_sha256.clone();
        write_dat(&self.path(name), &hash, columns, points)?;
        self.record(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Parse(e.to_string()))?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        self.record(name)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        self.record(name)
    }

    /// Write `manifest-<command>.json`; `outcome` summarises the verdict.
    pub fn finish(mut self, outcome: &str) -> Result<PathBuf> {
        self.manifest.outcome = outcome.to_string();
        let path = self.path(&format!("manifest-{}.json", self.manifest.command));
        let mut f = fs::File::create(&path)?;
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| crate::Error::Parse(e.to_string()))?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: f64,
        b: u32,
    }

    #[test]
    fn manifest_lists_hashed_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = Reporter::new(dir.path(), "test", "seed = 1\n", 1).unwrap();
        rep.csv("rows.csv", &[Row { a: 0.5, b: 2 }]).unwrap();
        rep.dat("curve.dat", ["t", "x"], &[(0.0, 1.0), (0.5, 2.0)]).unwrap();
        let hash = rep.config_hash().to_string();
        let path = rep.finish("ok").unwrap();
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(m["config_sha256"], hash);
        assert_eq!(m["artifacts"].as_array().unwrap().len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("rows.csv")).unwrap(), "a,b\n0.5,2\n");
        assert!(fs::read_to_string(dir.path().join("curve.dat"))
            .unwrap()
            .contains(&hash));
    }
}
