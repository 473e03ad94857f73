use serde::{Deserialize, Serialize};

use super::HeightPath;
use crate::error::{Error, Result};
use crate::stochastic::ScalingParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeValue {
    pub raw_pairs: u64,
    /// `raw_pairs * local_time_unit` when a scaling context is supplied.
    pub normalized: Option<f64>,
}

impl LocalTimeValue {
    fn new(raw_pairs: u64, scaling: Option<&ScalingParams>) -> Self {
        Self {
            raw_pairs,
            normalized: scaling.map(|s| raw_pairs as f64 * s.local_time_unit),
        }
    }
}

/// Climbs `m_prev -> M` with `m_prev <= t < M`, one per crossing pair.
pub fn crossing_pairs(path: &HeightPath, t: f64) -> u64 {
    let mut n = 0;
    for exc in &path.excursions {
        let mut prev = 0.0;
        for (big, small) in exc.extrema() {
            if prev <= t && t < big {
                n += 1;
            }
            prev = small;
        }
    }
    n
}

pub fn local_time(path: &HeightPath, t: f64, scaling: Option<&ScalingParams>) -> LocalTimeValue {
    LocalTimeValue::new(crossing_pairs(path, t), scaling)
}

/// Local time at every level of a sorted grid, in one pass over the climbs.
pub fn local_time_profile(
    path: &HeightPath,
    grid: &[f64],
    scaling: Option<&ScalingParams>,
) -> Result<Vec<LocalTimeValue>> {
    if grid.iter().any(|t| t.is_nan()) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("t_grid", "must be sorted"));
    }
    let climbs = path.excursions.iter().flat_map(|exc| {
        let mut prev = 0.0;
        exc.extrema().map(move |(big, small)| {
            let lo = prev;
            prev = small;
            (lo, big)
        })
    });
    Ok(half_open_counts(climbs, grid)
        .into_iter()
        .map(|c| LocalTimeValue::new(c, scaling))
        .collect())
}

/// For each grid level, the number of intervals `[lo, hi)` containing it.
fn half_open_counts(intervals: impl Iterator<Item = (f64, f64)>, grid: &[f64]) -> Vec<u64> {
    let mut diff = vec![0i64; grid.len() + 1];
    for (lo, hi) in intervals {
        let a = grid.partition_point(|&t| t < lo);
        let b = grid.partition_point(|&t| t < hi);
        diff[a] += 1;
        diff[b] -= 1;
    }
    let mut acc = 0i64;
    diff[..grid.len()]
        .iter()
        .map(|d| {
            acc += d;
            acc as u64
        })
        .collect()
}

/// Piecewise-constant function of the level: `values[i]` on
/// `[breaks[i], breaks[i+1])`, zero elsewhere. The last break may be `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFunction {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl LevelFunction {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::param("g", "need one more break than values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("g", "values must be finite"));
        }
        if !breaks[0].is_finite() || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("g", "breaks must be strictly increasing from a finite start"));
        }
        Ok(Self { breaks, values })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![0.0, f64::INFINITY], vec![c])
    }

    /// Indicator of `[lo, hi)`.
    pub fn band(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![1.0])
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn eval(&self, h: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= h);
        if i == 0 || i == self.breaks.len() {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    /// `int_lo^hi g`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let mut sum = 0.0;
        for (w, &v) in self.breaks.windows(2).zip(&self.values) {
            let a = w[0].max(lo);
            let b = w[1].min(hi);
            if b > a {
                sum += v * (b - a);
            }
        }
        sum
    }
}

/// Both sides of the occupation-times formula up to exploration time
/// `s_horizon` (may be infinite) under the path's clock: `lhs` integrates
/// `g(H_r)` along the segments in `s`, `rhs` integrates `g` against the
/// crossing-count local time in level space.
pub fn occupation_check(path: &HeightPath, g: &LevelFunction, s_horizon: f64) -> Result<(f64, f64)> {
    if !(s_horizon >= 0.0) {
        return Err(Error::param("s_horizon", "must be >= 0"));
    }
    let p = path.clock.slope();
    let budget = s_horizon * p;
    // truncated segments as level intervals
    let mut pieces = Vec::new();
    let mut used = 0.0;
    for seg in path.segments() {
        if used >= budget {
            break;
        }
        let len = seg.length().min(budget - used);
        used += len;
        let end = if seg.is_climb() { seg.from + len } else { seg.from - len };
        pieces.push((seg.from.min(end), seg.from.max(end)));
    }
    let complete = budget >= path.total_variation();

    let lhs: f64 = pieces.iter().map(|&(lo, hi)| g.integral(lo, hi)).sum::<f64>() / p;

    let mut cells: Vec<f64> = pieces
        .iter()
        .flat_map(|&(lo, hi)| [lo, hi])
        .chain(g.breaks().iter().copied().filter(|b| b.is_finite()))
        .collect();
    cells.sort_by(f64::total_cmp);
    cells.dedup();
    // visits per level: two per crossing pair for a whole path, otherwise
    // count the truncated pieces one by one
    let visits: Vec<u64> = if complete {
        local_time_profile(path, &cells, None)?
            .iter()
            .map(|v| 2 * v.raw_pairs)
            .collect()
    } else {
        half_open_counts(pieces.iter().copied(), &cells)
    };
    let rhs: f64 = cells
        .windows(2)
        .zip(&visits)
        .map(|(w, &n)| n as f64 * g.integral(w[0], w[1]))
        .sum::<f64>()
        / p;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::path::tests::three_peak;
    use crate::exploration::{ClockConvention, Excursion};
    use crate::stochastic::OffspringLaw;

    fn tent() -> HeightPath {
        HeightPath::new(
            vec![Excursion {
                maxima: vec![3.0],
                minima: vec![0.0],
                tags: vec![],
            }],
            5.0,
            ClockConvention::TreeClock { slope: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(crossing_pairs(&tent(), 1.0), 1);
        let p = three_peak();
        assert_eq!(crossing_pairs(&p, 2.0), 2);
        assert_eq!(crossing_pairs(&p, 0.5), 1);
        assert_eq!(crossing_pairs(&p, 1.0), 3);
        assert_eq!(crossing_pairs(&p, 3.0), 0);
        assert_eq!(crossing_pairs(&p, 0.0), 1);
    }

    #[test]
    fn profile_examples() {
        let raw: Vec<u64> = local_time_profile(&tent(), &[0.0, 1.0, 2.0, 4.0], None)
            .unwrap()
            .iter()
            .map(|v| v.raw_pairs)
            .collect();
        assert_eq!(raw, vec![1, 1, 1, 0]);
        assert!(local_time_profile(&tent(), &[1.0, 0.0], None).is_err());
        let p = three_peak();
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let prof = local_time_profile(&p, &grid, None).unwrap();
        for (t, v) in grid.iter().zip(&prof) {
            assert_eq!(v.raw_pairs, crossing_pairs(&p, *t));
        }
    }

    #[test]
    fn normalization() {
        let s = ScalingParams::new(20, 1.0, 1.0, 0.5, 1.0, OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).unwrap())
            .unwrap();
        let v = local_time(&three_peak(), 1.0, Some(&s));
        assert_eq!(v.normalized.unwrap() / v.raw_pairs as f64, s.local_time_unit);
        assert_eq!(local_time(&three_peak(), 1.0, None).normalized, None);
    }

    #[test]
    fn occupation_examples() {
        let p = three_peak();
        let (l, r) = occupation_check(&p, &LevelFunction::constant(1.0).unwrap(), f64::INFINITY).unwrap();
        assert_eq!((l, r), (5.5, 5.5));
        let (l, r) = occupation_check(&p, &LevelFunction::band(1.0, 2.0).unwrap(), f64::INFINITY).unwrap();
        assert_eq!((l, r), (2.5, 2.5));
        // truncated after the first climb and half the first descent
        let (l, r) = occupation_check(&p, &LevelFunction::band(1.0, 2.0).unwrap(), 2.5).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12, "{l} {r}");
    }

    #[test]
    fn thin_band_recovers_crossings() {
        let p = three_peak();
        for t in [0.5, 1.2, 2.0, 2.9] {
            for eps in [1e-2, 1e-4, 1e-6] {
                let (l, _) = occupation_check(&p, &LevelFunction::band(t, t + eps).unwrap(), f64::INFINITY).unwrap();
                let pairs = l * p.clock.slope() / (2.0 * eps);
                assert!((pairs - crossing_pairs(&p, t) as f64).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn level_function_rules() {
        assert!(LevelFunction::new(vec![0.0, 1.0], vec![f64::NAN]).is_err());
        assert!(LevelFunction::new(vec![1.0, 0.0], vec![1.0]).is_err());
        let g = LevelFunction::new(vec![0.0, 1.0, 2.0], vec![2.0, -1.0]).unwrap();
        assert_eq!(g.eval(0.5), 2.0);
        assert_eq!(g.eval(1.0), -1.0);
        assert_eq!(g.eval(2.0), 0.0);
        assert_eq!(g.integral(0.5, 1.5), 0.5);
    }
}
