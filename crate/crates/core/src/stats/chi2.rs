use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::stochastic::OffspringLaw;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub stat: f64,
    pub df: usize,
    pub p: f64,
    /// Cells after pooling, as (first size, last size, observed, expected).
    pub cells: Vec<(u32, u32, u64, f64)>,
}

/// Pearson goodness of fit of observed batch sizes against `law`. Adjacent
/// support points are pooled from the left until every cell expects at
/// least 5; a short final cell is merged into its neighbour.
pub fn chi2_gof(counts: &BTreeMap<u32, u64>, law: &OffspringLaw) -> Result<Chi2Result> {
    let total: u64 = counts.values().sum();
    if total < 50 {
        return Err(Error::Statistics(format!(
            "chi-square needs at least 50 observations, got {total}"
        )));
    }
    if let Some(k) = counts.keys().find(|k| law.prob(**k) == 0.0) {
        return Err(Error::Statistics(format!("observed size {k} outside the support")));
    }
    let n = total as f64;
    let mut cells: Vec<(u32, u32, u64, f64)> = Vec::new();
    let mut open: Option<(u32, u32, u64, f64)> = None;
    for (&size, &p) in law.support().iter().zip(law.probabilities()) {
        let obs = counts.get(&size).copied().unwrap_or(0);
        let cell = match open.take() {
            Some((lo, _, o, e)) => (lo, size, o + obs, e + n * p),
            None => (size, size, obs, n * p),
        };
        if cell.3 >= 5.0 {
            cells.push(cell);
        } else {
            open = Some(cell);
        }
    }
    if let Some(rest) = open {
        match cells.last_mut() {
            Some(last) => {
                last.1 = rest.1;
                last.2 += rest.2;
                last.3 += rest.3;
            }
            None => cells.push(rest),
        }
    }
    let stat: f64 = cells
        .iter()
        .map(|&(_, _, o, e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = cells.len() - 1;
    let p = if df == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(df as f64).map_err(|e| Error::Statistics(e.to_string()))?;
        1.0 - dist.cdf(stat)
    };
    Ok(Chi2Result { stat, df, p, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RngStream;

    #[test]
    fn proportional_counts() {
        let law = OffspringLaw::from_pmf([(1, 0.25), (2, 0.75)]).unwrap();
        let counts = BTreeMap::from([(1, 25), (2, 75)]);
        let r = chi2_gof(&counts, &law).unwrap();
        assert_eq!(r.stat, 0.0);
        assert_eq!(r.df, 1);
    }

    #[test]
    fn single_cell_is_vacuous() {
        let law = OffspringLaw::deterministic(2).unwrap();
        let r = chi2_gof(&BTreeMap::from([(2, 80)]), &law).unwrap();
        assert_eq!((r.df, r.p), (0, 1.0));
    }

    #[test]
    fn minima_and_support() {
        let law = OffspringLaw::binary();
        assert!(chi2_gof(&BTreeMap::from([(1, 49)]), &law).is_err());
        assert!(chi2_gof(&BTreeMap::from([(1, 49), (2, 1)]), &law).is_err());
    }

    #[test]
    fn tail_pooling() {
        let law = OffspringLaw::truncated_geometric(0.5, 12).unwrap();
        let mut rng = RngStream::new(11, 0);
        let mut counts = BTreeMap::new();
        for _ in 0..200 {
            *counts.entry(law.sample(&mut rng)).or_insert(0) += 1;
        }
        let r = chi2_gof(&counts, &law).unwrap();
        assert!(r.cells.iter().all(|c| c.3 >= 5.0));
        assert_eq!(r.cells.last().unwrap().1, 12);
    }

    #[test]
    fn sampled_batches_fit() {
        let law = OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).unwrap();
        let mut rng = RngStream::new(42, 0);
        let mut counts = BTreeMap::new();
        for _ in 0..10_000 {
            *counts.entry(law.sample(&mut rng)).or_insert(0) += 1;
        }
        assert!(chi2_gof(&counts, &law).unwrap().p > 0.001);
    }
}
