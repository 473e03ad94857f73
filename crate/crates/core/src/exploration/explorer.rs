use std::collections::VecDeque;

use super::{ClockConvention, Excursion, HeightPath, MinimumTag};
use crate::error::{ensure_positive, Error, Result};
use crate::stochastic::{ModelParams, OffspringLaw, RngStream};

pub const DEFAULT_EXTREMA_CAP: usize = 10_000_000;

/// Source of the three kinds of draws the explorer consumes.
pub trait ExplorationDraws {
    /// Height climbed before the next death, `Exp(mu)`.
    fn climb(&mut self, mu: f64) -> f64;
    /// Height descended before the next birth event, `Exp(lambda)`.
    fn descend(&mut self, lambda: f64) -> f64;
    fn batch(&mut self, law: &OffspringLaw) -> u32;
}

impl ExplorationDraws for RngStream {
    #[inline]
    fn climb(&mut self, mu: f64) -> f64 {
        self.exp(mu)
    }

    #[inline]
    fn descend(&mut self, lambda: f64) -> f64 {
        self.exp(lambda)
    }

    #[inline]
    fn batch(&mut self, law: &OffspringLaw) -> u32 {
        law.sample(self)
    }
}

/// Fixed draw sequences for hand-traced checks. Panics when a sequence runs
/// out.
#[derive(Clone, Debug, Default)]
pub struct ScriptedDraws {
    climbs: VecDeque<f64>,
    descents: VecDeque<f64>,
    batches: VecDeque<u32>,
}

impl ScriptedDraws {
    pub fn new(climbs: &[f64], descents: &[f64], batches: &[u32]) -> Self {
        Self {
            climbs: climbs.iter().copied().collect(),
            descents: descents.iter().copied().collect(),
            batches: batches.iter().copied().collect(),
        }
    }
}

impl ExplorationDraws for ScriptedDraws {
    fn climb(&mut self, _: f64) -> f64 {
        self.climbs.pop_front().expect("scripted climbs exhausted")
    }

    fn descend(&mut self, _: f64) -> f64 {
        self.descents.pop_front().expect("scripted descents exhausted")
    }

    fn batch(&mut self, _: &OffspringLaw) -> u32 {
        self.batches.pop_front().expect("scripted batches exhausted")
    }
}

/// One climb-descend pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub max: f64,
    pub min: f64,
    pub tag: MinimumTag,
}

/// Streaming form of the extrema sampler. The stack holds pending sibling
/// groups as `(level, siblings left)`; its top is the floor of the current
/// descent.
#[derive(Clone, Debug)]
pub struct Explorer<'a> {
    params: &'a ModelParams,
    level: f64,
    stack: Vec<(f64, u32)>,
}

impl<'a> Explorer<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        Self {
            params,
            level: 0.0,
            stack: Vec::new(),
        }
    }

    /// Current minimum level (0 between trees).
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn pending_groups(&self) -> usize {
        self.stack.len()
    }

    #[inline]
    pub fn step<D: ExplorationDraws>(&mut self, draws: &mut D) -> Step {
        let p = self.params;
        let max = (self.level + draws.climb(p.mu)).min(p.gamma);
        let target = max - draws.descend(p.lambda);
        let floor = self.stack.last().map_or(0.0, |g| g.0);
        let (min, tag) = if target > floor {
            let batch = draws.batch(&p.offspring);
            if batch > 1 {
                self.stack.push((target, batch - 1));
            }
            (target, MinimumTag::NewBirthEvent { batch })
        } else if let Some(top) = self.stack.last_mut() {
            top.1 -= 1;
            let level = top.0;
            if top.1 == 0 {
                self.stack.pop();
            }
            (level, MinimumTag::SiblingRevisit)
        } else {
            (0.0, MinimumTag::ExcursionEnd)
        };
        self.level = min;
        Step { max, min, tag }
    }
}

/// Samples the exploration path of `n_trees` independent trees directly,
/// without building them. Levels are tree times; the returned clock is
/// [`ClockConvention::HeightClock`].
pub fn explore_direct<D: ExplorationDraws>(
    params: &ModelParams,
    n_trees: usize,
    draws: &mut D,
    cap: usize,
) -> Result<HeightPath> {
    if n_trees == 0 {
        return Err(Error::param("n_trees", "must be >= 1"));
    }
    let mut ex = Explorer::new(params);
    let mut excursions = Vec::with_capacity(n_trees);
    let mut total = 0usize;
    for _ in 0..n_trees {
        let mut exc = Excursion::default();
        loop {
            let step = ex.step(draws);
            total += 1;
            if total > cap {
                return Err(Error::CapExceeded { cap, partial: total });
            }
            exc.maxima.push(step.max);
            exc.minima.push(step.min);
            exc.tags.push(step.tag);
            if step.tag == MinimumTag::ExcursionEnd {
                break;
            }
        }
        excursions.push(exc);
    }
    Ok(HeightPath {
        excursions,
        gamma: params.gamma,
        clock: ClockConvention::HeightClock,
    })
}

/// Height at exploration time `s` of the path of an endless sequence of
/// trees, run at `slope`.
pub fn height_at<D: ExplorationDraws>(
    params: &ModelParams,
    slope: f64,
    s: f64,
    draws: &mut D,
    cap: usize,
) -> Result<f64> {
    ensure_positive("slope", slope)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::param("s", format!("must be finite and >= 0, got {s}")));
    }
    // work in height units: total variation travelled so far
    let budget = s * slope;
    let mut used = 0.0;
    let mut ex = Explorer::new(params);
    for _ in 0..cap {
        let start = ex.level();
        let step = ex.step(draws);
        let up = step.max - start;
        if used + up >= budget {
            return Ok(start + (budget - used));
        }
        used += up;
        let down = step.max - step.min;
        if used + down >= budget {
            return Ok(step.max - (budget - used));
        }
        used += down;
    }
    Err(Error::CapExceeded { cap, partial: cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::path::tests::three_peak;

    fn model(gamma: f64) -> ModelParams {
        let law = OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).unwrap();
        ModelParams::new(law, 0.3, 1.0, gamma).unwrap()
    }

    #[test]
    fn scripted_single_climb() {
        let mut d = ScriptedDraws::new(&[3.0], &[5.0], &[]);
        let p = explore_direct(&model(f64::INFINITY), 1, &mut d, 10).unwrap();
        assert_eq!(p.excursions[0].maxima, vec![3.0]);
        assert_eq!(p.excursions[0].minima, vec![0.0]);
    }

    #[test]
    fn scripted_three_peaks() {
        let mut d = ScriptedDraws::new(&[3.0, 2.0, 0.5], &[2.0, 5.0, 5.0], &[2]);
        let p = explore_direct(&model(f64::INFINITY), 1, &mut d, 10).unwrap();
        assert_eq!(p.excursions, three_peak().excursions);
    }

    #[test]
    fn capped_at_gamma() {
        let mut d = ScriptedDraws::new(&[3.0], &[5.0], &[]);
        let p = explore_direct(&model(2.0), 1, &mut d, 10).unwrap();
        assert_eq!(p.excursions[0].maxima, vec![2.0]);
    }

    #[test]
    fn generated_paths_are_valid() {
        let mut rng = RngStream::new(12, 0);
        for gamma in [0.5, 2.0, f64::INFINITY] {
            for _ in 0..200 {
                let p = explore_direct(&model(gamma), 3, &mut rng, DEFAULT_EXTREMA_CAP).unwrap();
                p.validate().unwrap();
                assert!(p.max_height() <= gamma);
            }
        }
    }

    #[test]
    fn cap_reported() {
        let law = OffspringLaw::deterministic(3).unwrap();
        let p = ModelParams::new(law, 5.0, 1.0, 100.0).unwrap();
        let mut rng = RngStream::new(13, 0);
        assert!(matches!(
            explore_direct(&p, 1, &mut rng, 50),
            Err(Error::CapExceeded { cap: 50, .. })
        ));
    }

    #[test]
    fn height_interpolates() {
        // tent to 3 at slope 2: height 2 at s = 1, height 1 at s = 2.5
        let params = model(f64::INFINITY);
        let mk = || ScriptedDraws::new(&[3.0, 9.0], &[5.0, 1.0], &[1]);
        assert_eq!(height_at(&params, 2.0, 1.0, &mut mk(), 10).unwrap(), 2.0);
        assert_eq!(height_at(&params, 2.0, 2.5, &mut mk(), 10).unwrap(), 1.0);
        assert_eq!(height_at(&params, 2.0, 0.0, &mut mk(), 10).unwrap(), 0.0);
    }
}
