use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::SamplePool;

/// Significance level behind every acceptance threshold.
pub const KS_ALPHA: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
}

pub fn ks_two_sample(a: &SamplePool, b: &SamplePool) -> Result<KsResult> {
    ks_two_sample_values(&a.values, &b.values)
}

/// Two-sample statistic over the pooled points, with both ECDFs taken
/// right-continuously so ties move together.
pub fn ks_two_sample_values(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Statistics("empty sample".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] == v {
            i += 1;
        }
        while j < m && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult {
        d,
        p: kolmogorov_q(ne.sqrt() * d),
    })
}

/// One-sample statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<KsResult> {
    if values.is_empty() {
        return Err(Error::Statistics("empty sample".into()));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - k as f64 / n).max((k + 1) as f64 / n - f);
    }
    Ok(KsResult {
        d,
        p: kolmogorov_q(n.sqrt() * d),
    })
}

/// Upper tail of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic critical value `c(alpha) sqrt((n + m) / (n m))`, with
/// `c(alpha) = sqrt(-ln(alpha / 2) / 2)`. Pass `m = None` for one sample.
pub fn ks_critical_value(n: usize, m: Option<usize>, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let n = n as f64;
    match m {
        Some(m) => {
            let m = m as f64;
            c * ((n + m) / (n * m)).sqrt()
        }
        None => c / n.sqrt(),
    }
}
