//! Points of a homogeneous Poisson process on the half-line, with the
//! implicit origin `T_0 = 0`.

use serde::{Deserialize, Serialize};

use super::RngStream;
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};

/// Strictly increasing nonnegative points; `T_0 = 0` is implicit and not stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PointSet(Vec<f64>);

impl TryFrom<Vec<f64>> for PointSet {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        PointSet::new(points)
    }
}

impl From<PointSet> for Vec<f64> {
    fn from(p: PointSet) -> Self {
        p.0
    }
}

impl PointSet {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if let Some(bad) = points.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidPoints(format!("point {bad} is not a finite nonnegative real")));
        }
        if let Some(w) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPoints(format!(
                "points not strictly increasing at index {}",
                w + 1
            )));
        }
        Ok(Self(points))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `T_k` with `T_0 = 0`.
    pub fn get(&self, k: usize) -> Option<f64> {
        if k == 0 {
            Some(0.0)
        } else {
            self.0.get(k - 1).copied()
        }
    }

    /// Successive gaps `T_k - T_{k-1}`, starting from the origin.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0)
            .chain(self.0.iter().copied())
            .zip(self.0.iter().copied())
            .map(|(a, b)| b - a)
    }
}

/// Poisson points of intensity `rate` in `(0, horizon]`.
pub fn poisson_points(rate: f64, horizon: f64, rng: &mut RngStream) -> Result<PointSet> {
    ensure_positive("rate", rate)?;
    ensure_positive("horizon", horizon)?;
    let mut out = Vec::new();
    let mut t = rng.exp(rate);
    while t <= horizon {
        out.push(t);
        t += rng.exp(rate);
    }
    Ok(PointSet(out))
}

/// `R_m = sup{T_k : T_k <= m}` and its rank `k` (`0` for the origin).
pub fn last_point_before(points: &PointSet, m: f64) -> Result<(f64, usize)> {
    ensure_nonnegative("m", m)?;
    let k = points.0.partition_point(|&t| t <= m);
    Ok((points.get(k).unwrap(), k))
}

/// Replaces everything from `R_m` on by a fresh process started at `R_m`:
/// `T'_k = T_k` for `k < K` and `T'_k = T_K + F_{k-K+1}` for `k >= K`, where
/// `K` is the rank of `R_m` and `F` are the points of `fresh`.
pub fn splice(points: &PointSet, m: f64, fresh: &PointSet) -> Result<PointSet> {
    let (r, k) = last_point_before(points, m)?;
    let keep = k.saturating_sub(1);
    let mut out = Vec::with_capacity(keep + fresh.len());
    out.extend_from_slice(&points.0[..keep]);
    out.extend(fresh.0.iter().map(|f| r + f));
    PointSet::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[f64]) -> PointSet {
        PointSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn last_point_examples() {
        let p = set(&[1.0, 2.0, 3.0]);
        assert_eq!(last_point_before(&p, 2.5).unwrap(), (2.0, 2));
        assert_eq!(last_point_before(&p, 0.5).unwrap(), (0.0, 0));
        assert_eq!(last_point_before(&p, 3.0).unwrap(), (3.0, 3));
        assert!(last_point_before(&p, -1.0).is_err());
    }

    #[test]
    fn splice_drops_the_last_point_and_shifts_fresh() {
        let p = set(&[1.0, 2.0, 3.0]);
        let fresh = set(&[0.4, 0.9]);
        let s = splice(&p, 2.5, &fresh).unwrap();
        assert_eq!(s.points(), &[1.0, 2.4, 2.9]);
        // nothing before m: the spliced set is the fresh one
        let s = splice(&p, 0.5, &fresh).unwrap();
        assert_eq!(s.points(), &[0.4, 0.9]);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(PointSet::new(vec![1.0, 0.5]).is_err());
        assert!(PointSet::new(vec![1.0, 1.0]).is_err());
        assert!(PointSet::new(vec![-0.1]).is_err());
        assert!(serde_json::from_str::<PointSet>("[2.0, 1.0]").is_err());
    }

    #[test]
    fn gaps_start_at_origin() {
        let g: Vec<f64> = set(&[1.0, 2.5, 3.0]).gaps().collect();
        assert_eq!(g, vec![1.0, 1.5, 0.0 + 0.5]);
    }

    #[test]
    fn tiny_horizon_is_empty() {
        let mut rng = RngStream::new(5, 0);
        let empty = (0..1000)
            .filter(|_| poisson_points(1.0, 1e-9, &mut rng).unwrap().is_empty())
            .count();
        assert_eq!(empty, 1000);
    }

    #[test]
    fn mean_count() {
        let mut rng = RngStream::new(6, 0);
        let reps = 100_000;
        let total: usize = (0..reps)
            .map(|_| poisson_points(2.0, 2.0, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / reps as f64;
        let se = (4.0 / reps as f64).sqrt();
        assert!((mean - 4.0).abs() < 5.0 * se, "mean {mean}");
    }

    proptest::proptest! {
        #[test]
        fn splice_keeps_prefix(
            mut raw in proptest::collection::vec(0.001f64..10.0, 0..20),
            fresh_raw in proptest::collection::vec(0.001f64..10.0, 0..5),
            m in 0.0f64..12.0,
        ) {
            raw.sort_by(f64::total_cmp);
            raw.dedup();
            let mut fr = fresh_raw;
            fr.sort_by(f64::total_cmp);
            fr.dedup();
            let p = PointSet::new(raw).unwrap();
            let f = PointSet::new(fr).unwrap();
            let (r, k) = last_point_before(&p, m).unwrap();
            let s = splice(&p, m, &f).unwrap();
            for j in 1..k {
                proptest::prop_assert_eq!(s.get(j), p.get(j));
            }
            proptest::prop_assert!(s.points().iter().skip(k.saturating_sub(1)).all(|&x| x > r || f.is_empty()));
        }
    }
}
