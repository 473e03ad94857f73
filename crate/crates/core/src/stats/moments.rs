use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::SamplePool;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

pub fn moments_with_se(pool: &SamplePool) -> Result<Moments> {
    sample_moments(&pool.values)
}

/// Mean, unbiased variance, and their standard errors; the variance error
/// uses the fourth central moment.
pub fn sample_moments(xs: &[f64]) -> Result<Moments> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Statistics(format!("need at least 2 values, got {n}")));
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in xs {
        let d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let mu4 = m4 / nf;
    let sigma4 = (m2 / nf) * (m2 / nf);
    let var_of_var = ((mu4 - sigma4 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0);
    Ok(Moments {
        mean,
        variance,
        se_mean: (variance / nf).sqrt(),
        se_variance: var_of_var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RngStream;

    #[test]
    fn small_pools() {
        assert_eq!(sample_moments(&[1.0, 1.0, 1.0]).unwrap().variance, 0.0);
        let m = sample_moments(&[0.0, 2.0]).unwrap();
        assert_eq!((m.mean, m.variance), (1.0, 2.0));
        assert!(sample_moments(&[1.0]).is_err());
    }

    #[test]
    fn exponential_pool() {
        let mut rng = RngStream::new(8, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| rng.exp(1.0)).collect();
        let m = sample_moments(&xs).unwrap();
        assert!((m.mean - 1.0).abs() < 5.0 * m.se_mean);
        assert!((m.variance - 1.0).abs() < 5.0 * m.se_variance);
        // Var(s^2) for Exp(1) is about (9 - 1) / n
        assert!((m.se_variance - (8.0 / 200_000.0f64).sqrt()).abs() < 2e-3);
    }
}
