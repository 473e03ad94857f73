use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RngStream;
use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Law of the batch size at a birth event, on a finite support of integers
/// `>= 1`, together with its mean `a`, variance `zeta2` and the constant
/// `delta = (a + a^2 + zeta2) / (2a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct OffspringLaw {
    sizes: Vec<u32>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    zeta2: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct PmfRepr {
    #[serde(deserialize_with = "pmf_keys")]
    pmf: BTreeMap<u32, f64>,
}

/// Keys as integers or numeric strings; buffered (internally tagged)
/// contexts hand JSON object keys over as plain strings.
fn pmf_keys<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<u32, f64>, D::Error> {
    #[derive(Deserialize, PartialEq, Eq, PartialOrd, Ord)]
    #[serde(untagged)]
    enum Key {
        Int(u32),
        Str(String),
    }
    BTreeMap::<Key, f64>::deserialize(d)?
        .into_iter()
        .map(|(k, p)| match k {
            Key::Int(k) => Ok((k, p)),
            Key::Str(s) => s
                .trim()
                .parse()
                .map(|k| (k, p))
                .map_err(|_| serde::de::Error::custom(format!("batch size `{s}` is not an integer"))),
        })
        .collect()
}

impl TryFrom<PmfRepr> for OffspringLaw {
    type Error = Error;

    fn try_from(r: PmfRepr) -> Result<Self> {
        OffspringLaw::from_pmf(r.pmf)
    }
}

impl From<OffspringLaw> for PmfRepr {
    fn from(law: OffspringLaw) -> Self {
        PmfRepr { pmf: law.pmf() }
    }
}

/// `(a, zeta2, delta)` from a pmf given as parallel slices.
fn constants(sizes: &[u32], probs: &[f64]) -> (f64, f64, f64) {
    let a: f64 = sizes.iter().zip(probs).map(|(&l, &p)| l as f64 * p).sum();
    let zeta2: f64 = sizes
        .iter()
        .zip(probs)
        .map(|(&l, &p)| (l as f64 - a).powi(2) * p)
        .sum();
    (a, zeta2, delta_of(a, zeta2))
}

fn delta_of(a: f64, zeta2: f64) -> f64 {
    (a + a * a + zeta2) / (2.0 * a)
}

impl OffspringLaw {
    /// Builds the law from a pmf. Zero-probability entries are rejected
    /// rather than silently dropped.
    pub fn from_pmf<I>(pmf: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let map: BTreeMap<u32, f64> = pmf.into_iter().collect();
        if map.is_empty() {
            return Err(Error::InvalidLaw("empty pmf".into()));
        }
        for (&l, &p) in &map {
            if l == 0 {
                return Err(Error::InvalidLaw("support must be >= 1".into()));
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidLaw(format!("p[{l}] = {p} is not > 0")));
            }
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        let sizes: Vec<u32> = map.keys().copied().collect();
        let probs: Vec<f64> = map.values().copied().collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        let (mean, zeta2, delta) = constants(&sizes, &probs);
        Ok(Self {
            sizes,
            probs,
            cdf,
            mean,
            zeta2,
            delta,
        })
    }

    /// Signed-integer entry point used by parsers: negative sizes are an error.
    pub fn from_signed_pmf<I>(pmf: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        let mut out = Vec::new();
        for (l, p) in pmf {
            let l = u32::try_from(l)
                .map_err(|_| Error::InvalidLaw(format!("batch size {l} is not >= 1")))?;
            out.push((l, p));
        }
        Self::from_pmf(out)
    }

    /// Every birth event produces exactly `k` children.
    pub fn deterministic(k: u32) -> Result<Self> {
        Self::from_pmf([(k, 1.0)])
    }

    /// Binary branching: one child per event.
    pub fn binary() -> Self {
        Self::deterministic(1).expect("valid")
    }

    /// `first` with probability `p_first`, `second` otherwise.
    pub fn two_point(first: u32, p_first: f64, second: u32) -> Result<Self> {
        if first == second {
            return Err(Error::InvalidLaw("two-point law needs distinct sizes".into()));
        }
        Self::from_pmf([(first, p_first), (second, 1.0 - p_first)])
    }

    /// Geometric on `1..=max` with success probability `p`, renormalised.
    pub fn truncated_geometric(p: f64, max: u32) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) || max == 0 {
            return Err(Error::InvalidLaw(format!(
                "truncated geometric needs p in (0,1] and max >= 1, got p={p}, max={max}"
            )));
        }
        let weights: Vec<f64> = (1..=max).map(|l| p * (1.0 - p).powi(l as i32 - 1)).collect();
        let total: f64 = weights.iter().sum();
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // absorb rounding into the largest cell so the sum is exactly 1
        let drift: f64 = 1.0 - probs.iter().sum::<f64>();
        probs[0] += drift;
        Self::from_pmf((1..=max).zip(probs).filter(|&(_, p)| p > 0.0))
    }

    pub fn pmf(&self) -> BTreeMap<u32, f64> {
        self.sizes.iter().copied().zip(self.probs.iter().copied()).collect()
    }

    pub fn support(&self) -> &[u32] {
        &self.sizes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, size: u32) -> f64 {
        match self.sizes.binary_search(&size) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    /// Mean batch size `a`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Variance `zeta^2` of the batch size.
    pub fn zeta2(&self) -> f64 {
        self.zeta2
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `E[Theta^2] = zeta^2 + a^2`.
    pub fn second_moment(&self) -> f64 {
        self.sizes
            .iter()
            .zip(&self.probs)
            .map(|(&l, &p)| (l as f64).powi(2) * p)
            .sum()
    }

    pub fn is_degenerate(&self) -> bool {
        self.sizes.len() == 1
    }

    pub fn max_size(&self) -> u32 {
        *self.sizes.last().unwrap()
    }

    /// Recomputes `(a, zeta2, delta)` from the stored pmf.
    pub fn recompute_constants(&self) -> (f64, f64, f64) {
        constants(&self.sizes, &self.probs)
    }

    /// Batch size for a uniform `u` in `[0, 1)`.
    #[inline]
    pub fn quantile(&self, u: f64) -> u32 {
        let i = self.cdf.partition_point(|&c| c <= u);
        self.sizes[i.min(self.sizes.len() - 1)]
    }

    /// Degenerate laws consume no randomness.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> u32 {
        if self.sizes.len() == 1 {
            self.sizes[0]
        } else {
            self.quantile(rng.uniform())
        }
    }
}
