use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonKind {
    /// Kolmogorov-Smirnov statistic.
    Ks,
    /// `|estimate - exact| / standard error`.
    ZScore,
    /// Count of exact mismatches.
    Exact,
    /// Largest increase along a sequence of statistics.
    Trend,
    /// Absolute empirical correlation.
    Correlation,
    /// Relative error of a deterministic identity.
    RelativeError,
    /// Pearson chi-square statistic.
    ChiSquare,
}

/// One statistic checked against a threshold; passes when
/// `statistic <= threshold`. Informational rows never fail a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub kind: ComparisonKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<String>,
    pub statistic: f64,
    pub threshold: f64,
    pub sizes: (usize, usize),
    pub gating: bool,
    pub pass: bool,
}

impl Comparison {
    pub fn new(label: impl Into<String>, kind: ComparisonKind, statistic: f64, threshold: f64) -> Self {
        Self {
            label: label.into(),
            kind,
            n: None,
            t: None,
            mode: None,
            statistic,
            threshold,
            sizes: (0, 0),
            gating: true,
            pass: statistic <= threshold,
        }
    }

    /// z-score of `estimate` against `exact`; a zero error with zero
    /// spread scores 0.
    pub fn z(label: impl Into<String>, estimate: f64, exact: f64, se: f64, threshold: f64) -> Self {
        let diff = (estimate - exact).abs();
        let z = if diff == 0.0 { 0.0 } else { diff / se };
        Self::new(label, ComparisonKind::ZScore, z, threshold)
    }

    pub fn at_n(mut self, n: u32) -> Self {
        self.n = Some(n);
        self
    }

    pub fn at_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn in_mode(mut self, mode: impl Into<String>) -> Self {
        self.mode = Some(mode.into());
        self
    }

    pub fn sized(mut self, a: usize, b: usize) -> Self {
        self.sizes = (a, b);
        self
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub comparisons: Vec<Comparison>,
    /// Auxiliary figures (dropped replicates, clock ratios, ...).
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, parameters: serde_json::Value, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            parameters,
            seed,
            comparisons: Vec::new(),
            values: BTreeMap::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, c: Comparison) {
        if c.gating && !c.pass {
            self.pass = false;
        }
        self.comparisons.push(c);
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn find(&self, label: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.label == label)
    }

    pub const CSV_HEADER: &'static str = "experiment,label,kind,n,t,mode,statistic,threshold,gating,pass";

    /// One row per comparison, without header.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in &self.comparisons {
            let opt = |v: Option<String>| v.unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                self.experiment,
                c.label,
                serde_json::to_value(c.kind).unwrap().as_str().unwrap(),
                opt(c.n.map(|n| n.to_string())),
                opt(c.t.map(|t| t.to_string())),
                opt(c.mode.clone()),
                c.statistic,
                c.threshold,
                c.gating,
                c.pass
            )?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        self.write_csv_rows(w)
    }
}
