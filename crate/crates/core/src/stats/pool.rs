use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolMetadata {
    pub seed: u64,
    pub params_digest: String,
    pub replicates: usize,
}

/// A labelled vector of finite Monte Carlo draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePool {
    pub label: String,
    pub values: Vec<f64>,
    pub metadata: PoolMetadata,
}

impl SamplePool {
    pub fn new(label: impl Into<String>, values: Vec<f64>, metadata: PoolMetadata) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Statistics("pool must hold at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Statistics(format!("value {i} is not finite")));
        }
        Ok(Self {
            label: label.into(),
            values,
            metadata,
        })
    }

    /// Pool without provenance, for ad hoc comparisons.
    pub fn bare(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(
            label,
            values,
            PoolMetadata {
                replicates: n,
                ..Default::default()
            },
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Single `value` column after a `# key: value` header block.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# label: {}", self.label)?;
        writeln!(w, "# seed: {}", self.metadata.seed)?;
        writeln!(w, "# params_digest: {}", self.metadata.params_digest)?;
        writeln!(w, "# replicates: {}", self.metadata.replicates)?;
        writeln!(w, "value")?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut label = String::new();
        let mut meta = PoolMetadata::default();
        let mut values = Vec::new();
        let mut seen_header = false;
        for (i, line) in r.lines().enumerate() {
            let err = |reason: String| Error::Parse { line: i + 1, reason };
            let line = line.map_err(|e| err(e.to_string()))?;
            let line = line.trim();
            if let Some(kv) = line.strip_prefix('#') {
                let (k, v) = kv
                    .split_once(':')
                    .ok_or_else(|| err("expected `# key: value`".into()))?;
                let v = v.trim();
                match k.trim() {
                    "label" => label = v.to_string(),
                    "seed" => meta.seed = v.parse().map_err(|_| err(format!("bad seed {v}")))?,
                    "params_digest" => meta.params_digest = v.to_string(),
                    "replicates" => {
                        meta.replicates = v.parse().map_err(|_| err(format!("bad count {v}")))?
                    }
                    _ => {}
                }
            } else if !seen_header {
                if line != "value" {
                    return Err(err(format!("expected header `value`, got `{line}`")));
                }
                seen_header = true;
            } else if !line.is_empty() {
                values.push(line.parse().map_err(|_| err(format!("bad value `{line}`")))?);
            }
        }
        Self::new(label, values, meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let pool = SamplePool::new(
            "x_t",
            vec![0.1, 1.0 / 3.0, 2.5e-300, 7.0],
            PoolMetadata {
                seed: 42,
                params_digest: "abc123".into(),
                replicates: 4,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        pool.write_csv(&mut buf).unwrap();
        assert_eq!(SamplePool::read_csv(&buf[..]).unwrap(), pool);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SamplePool::bare("e", vec![]).is_err());
        assert!(SamplePool::bare("n", vec![1.0, f64::NAN]).is_err());
    }
}
