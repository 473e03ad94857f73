use std::path::PathBuf;

use branch_contour::limits::HeightMode;
use branch_contour::stochastic::horizon_serde;
use branch_contour::{ModelParams, OffspringLaw, ScalingParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Tree-level model: offspring law, per-height rates and number of roots.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub offspring: OffspringLaw,
    pub lambda: f64,
    pub mu: f64,
    pub trees: usize,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            offspring: default_law(),
            lambda: 1.0,
            mu: 2.5,
            trees: 3,
        }
    }
}

/// Rescaled family indexed by `N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingBlock {
    #[serde(rename = "N", alias = "n")]
    pub n: u32,
    pub x: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub offspring: OffspringLaw,
}

impl Default for ScalingBlock {
    fn default() -> Self {
        Self {
            n: 20,
            x: 1.0,
            sigma: 1.0,
            alpha: 0.5,
            beta: 1.0,
            offspring: default_law(),
        }
    }
}

fn default_law() -> OffspringLaw {
    OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).expect("valid pmf")
}

/// Every knob of every subcommand. A JSON file may set any subset of keys;
/// flags override the file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Replicates per sample family; each subcommand has its own default.
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    /// Clock for `explore` and `converge-h`; both modes when unset.
    pub mode: Option<HeightMode>,
    #[serde(with = "horizon_serde")]
    pub gamma: f64,
    pub model: ModelBlock,
    pub scaling: ScalingBlock,
    /// Levels for `population` and `rayknight`.
    pub levels: Vec<f64>,
    /// Values of `N` for the convergence runs; each has its own default.
    pub n_list: Option<Vec<u32>>,
    /// Time of the `converge-x` marginal.
    pub t: f64,
    /// Exploration time of the `converge-h` marginal.
    pub s: f64,
    /// Step of the reflected Brownian reference.
    pub ds: f64,
    /// Slope used to parametrize `contour` and `explore` paths.
    pub slope: f64,
    pub final_ks: f64,
    pub trend_slack: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            reps: None,
            threads: None,
            out: PathBuf::from("out"),
            mode: None,
            gamma: 2.0,
            model: ModelBlock::default(),
            scaling: ScalingBlock::default(),
            levels: vec![0.5, 1.0, 1.5],
            n_list: None,
            t: 1.0,
            s: 1.0,
            ds: 1e-3,
            slope: 1.0,
            final_ks: 0.05,
            trend_slack: 0.01,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn reps_or(&self, default: usize) -> usize {
        self.reps.unwrap_or(default)
    }

    pub fn model_params(&self) -> Result<ModelParams, String> {
        let m = &self.model;
        if m.trees == 0 {
            return Err("model.trees must be >= 1".into());
        }
        ModelParams::new(m.offspring.clone(), m.lambda, m.mu, self.gamma).map_err(|e| e.to_string())
    }

    pub fn scaling_params(&self) -> Result<ScalingParams, String> {
        let s = &self.scaling;
        ScalingParams::new(s.n, s.x, s.sigma, s.alpha, s.beta, s.offspring.clone()).map_err(|e| e.to_string())
    }

    /// Levels must be sorted and lie in `[0, gamma)`.
    pub fn checked_levels(&self) -> Result<Vec<f64>, String> {
        let l = &self.levels;
        if l.is_empty() {
            return Err("levels must not be empty".into());
        }
        if l.windows(2).any(|w| w[0] > w[1]) {
            return Err("levels must be sorted".into());
        }
        if l.iter().any(|&t| !(0.0..self.gamma).contains(&t)) {
            return Err(format!("levels must lie in [0, gamma = {})", self.gamma));
        }
        Ok(l.clone())
    }

    pub fn check_positive(name: &str, v: f64) -> Result<f64, String> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name} must be finite and > 0, got {v}"))
        }
    }

    /// SHA-256 of the subcommand and the canonical JSON of the config,
    /// leaving out the keys that must not change results (`threads`, `out`).
    pub fn digest(&self, subcommand: &str) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("threads");
            map.remove("out");
        }
        let mut h = Sha256::new();
        h.update(subcommand.as_bytes());
        h.update(b"\n");
        h.update(serde_json::to_vec(&v).expect("value serializes"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
