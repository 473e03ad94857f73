use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use branch_contour::ExperimentReport;
use serde::Serialize;
use serde_json::json;

/// Writes run outputs into one directory, stamping each file with the
/// config digest and seed: `#` comment lines for CSV and JSON-lines, top
/// level keys for JSON.
pub struct Artifacts {
    dir: PathBuf,
    digest: String,
    seed: u64,
}

impl Artifacts {
    pub fn create(dir: &Path, digest: String, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            digest,
            seed,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Text file with a `#` stamp, body produced by `body`.
    pub fn stamped<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        writeln!(buf, "# config_digest: {}", self.digest)?;
        writeln!(buf, "# seed: {}", self.seed)?;
        body(&mut buf)?;
        self.write(name, &buf)
    }

    /// JSON object `{config_digest, seed, <key>: value}`.
    pub fn json<T: Serialize>(&self, name: &str, key: &str, value: &T) -> Result<PathBuf> {
        let doc = json!({ "config_digest": self.digest, "seed": self.seed, key: value });
        let mut buf = serde_json::to_vec_pretty(&doc)?;
        buf.push(b'\n');
        self.write(name, &buf)
    }

    /// Reports as JSON plus a CSV with one row per comparison.
    pub fn reports(&self, stem: &str, reports: &[ExperimentReport]) -> Result<()> {
        self.json(&format!("{stem}.json"), "reports", &reports)?;
        self.stamped(&format!("{stem}.csv"), |w| {
            writeln!(w, "{}", ExperimentReport::CSV_HEADER)?;
            for r in reports {
                r.write_csv_rows(&mut *w)?;
            }
            Ok(())
        })?;
        Ok(())
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }
}
