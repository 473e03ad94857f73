use std::io::Write;

use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::branching::Forest;
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::stochastic::{ModelParams, RngStream};

pub const DEFAULT_EVENT_CAP: usize = 50_000_000;

/// Right-continuous step path. `counts[i]` holds on `[times[i], times[i+1])`;
/// the value is `counts[i] / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationPath {
    pub times: Vec<f64>,
    pub counts: Vec<u64>,
    pub scale: u32,
    #[serde(with = "crate::stochastic::horizon_serde")]
    pub horizon: f64,
}

impl PopulationPath {
    fn start(z0: u64, horizon: f64) -> Self {
        Self {
            times: vec![0.0],
            counts: vec![z0],
            scale: 1,
            horizon,
        }
    }

    fn push(&mut self, t: f64, z: u64) {
        // coincident jumps collapse into one step
        if *self.times.last().unwrap() == t {
            *self.counts.last_mut().unwrap() = z;
        } else {
            self.times.push(t);
            self.counts.push(z);
        }
    }

    pub fn initial(&self) -> u64 {
        self.counts[0]
    }

    pub fn count_at(&self, t: f64) -> u64 {
        let i = self.times.partition_point(|&s| s <= t);
        self.counts[i.saturating_sub(1)]
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.count_at(t) as f64 / self.scale as f64
    }

    pub fn jumps(&self) -> impl Iterator<Item = i64> + '_ {
        self.counts.windows(2).map(|w| w[1] as i64 - w[0] as i64)
    }

    /// CSV with columns `t,z`; `z` is the rescaled value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,z")?;
        for (t, c) in self.times.iter().zip(&self.counts) {
            if self.scale == 1 {
                writeln!(w, "{t},{c}")?;
            } else {
                writeln!(w, "{t},{}", *c as f64 / self.scale as f64)?;
            }
        }
        Ok(())
    }
}

/// Number alive as a function of time, read off a complete forest.
pub fn population_path(forest: &Forest) -> PopulationPath {
    let mut jumps: Vec<(f64, i64)> = Vec::new();
    for ind in &forest.individuals {
        for ev in &ind.birth_events {
            jumps.push((ev.time, ev.children.len() as i64));
        }
        if !ind.killed_at_gamma {
            jumps.push((ind.death_time, -1));
        }
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut path = PopulationPath::start(forest.roots.len() as u64, forest.gamma);
    let mut z = forest.roots.len() as i64;
    for (t, dz) in jumps {
        z += dz;
        path.push(t, z as u64);
    }
    path
}

/// Markov-chain simulation of the population, stopped at the horizon or at
/// extinction.
pub fn gillespie_population(
    params: &ModelParams,
    z0: u64,
    rng: &mut RngStream,
    cap: usize,
) -> Result<PopulationPath> {
    let mut path = PopulationPath::start(z0, params.gamma);
    let total = params.lambda + params.mu;
    let p_birth = params.lambda / total;
    let (mut t, mut z) = (0.0, z0);
    let mut events = 0usize;
    while z > 0 {
        t += rng.exp(total * z as f64);
        if t >= params.gamma {
            break;
        }
        events += 1;
        if events > cap {
            return Err(Error::CapExceeded {
                cap,
                partial: events,
            });
        }
        if rng.uniform() < p_birth {
            z += params.offspring.sample(rng) as u64;
        } else {
            z -= 1;
        }
        path.push(t, z);
    }
    Ok(path)
}

/// Same chain as [`gillespie_population`] but only records `Z` at the
/// increasing `times`, without storing the path.
pub fn gillespie_endpoints(
    params: &ModelParams,
    z0: u64,
    times: &[f64],
    rng: &mut RngStream,
    cap: usize,
) -> Result<Vec<u64>> {
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::param("times", "must be sorted"));
    }
    for &t in times {
        ensure_nonnegative("times", t)?;
    }
    let total = params.lambda + params.mu;
    let p_birth = params.lambda / total;
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut z) = (0.0, z0);
    let mut events = 0usize;
    let mut next = 0;
    while next < times.len() {
        let dt = if z > 0 {
            rng.exp(total * z as f64)
        } else {
            f64::INFINITY
        };
        while next < times.len() && t + dt > times[next] {
            out.push(z);
            next += 1;
        }
        if next == times.len() {
            break;
        }
        t += dt;
        events += 1;
        if events > cap {
            return Err(Error::CapExceeded {
                cap,
                partial: events,
            });
        }
        if rng.uniform() < p_birth {
            z += params.offspring.sample(rng) as u64;
        } else {
            z -= 1;
        }
    }
    Ok(out)
}

/// Exact draw of `Z_t` for the linear birth-death chain (every batch of size
/// one) started from `z0`, via its linear-fractional transition law: each
/// ancestor's line is extinct with probability `p0`, and a surviving line has
/// a geometric size on `{1, 2, ...}` with ratio `q`.
pub fn linear_birth_death_sample(
    lambda: f64,
    mu: f64,
    z0: u64,
    t: f64,
    rng: &mut RngStream,
) -> Result<u64> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("mu", mu)?;
    ensure_nonnegative("t", t)?;
    if z0 == 0 || t == 0.0 {
        return Ok(z0);
    }
    let r = lambda - mu;
    let (p0, q) = if (r * t).abs() < 1e-12 {
        let u = lambda * t;
        (u / (1.0 + u), u / (1.0 + u))
    } else {
        let em1 = (r * t).exp_m1();
        let denom = lambda * em1 + r;
        (mu * em1 / denom, lambda * em1 / denom)
    };
    let survivors = Binomial::new(z0, (1.0 - p0).clamp(0.0, 1.0))
        .map_err(|e| Error::param("p0", e.to_string()))?
        .sample(rng);
    if survivors == 0 {
        return Ok(0);
    }
    if q <= 0.0 {
        return Ok(survivors);
    }
    // sum of `survivors` geometrics = survivors + NegBin(survivors, 1 - q),
    // drawn as a gamma-mixed Poisson
    let rate = Gamma::new(survivors as f64, q / (1.0 - q))
        .map_err(|e| Error::param("q", e.to_string()))?
        .sample(rng);
    let extra = if rate > 0.0 {
        Poisson::new(rate)
            .map_err(|e| Error::param("q", e.to_string()))?
            .sample(rng) as u64
    } else {
        0
    };
    Ok(survivors + extra)
}

/// Divides every value by `n` (`X = Z / N`); jump times are unchanged.
pub fn rescale_path(path: &PopulationPath, n: u32) -> Result<PopulationPath> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    let mut out = path.clone();
    out.scale = path.scale * n;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{simulate_forest, BirthEvent, Individual, TreeCaps};
    use crate::stochastic::{OffspringLaw, ScalingParams};

    fn lone(lifetime: f64, gamma: f64) -> Forest {
        Forest {
            individuals: vec![Individual {
                id: 0,
                parent: None,
                birth_time: 0.0,
                death_time: lifetime,
                killed_at_gamma: lifetime == gamma,
                birth_events: vec![],
            }],
            roots: vec![0],
            gamma,
        }
    }

    #[test]
    fn childless_individual() {
        let p = population_path(&lone(1.3, 5.0));
        assert_eq!(p.times, vec![0.0, 1.3]);
        assert_eq!(p.counts, vec![1, 0]);
        assert_eq!(p.count_at(1.29), 1);
        assert_eq!(p.count_at(1.3), 0);
    }

    #[test]
    fn batch_of_two() {
        let mk = |id, parent, b, d| Individual {
            id,
            parent,
            birth_time: b,
            death_time: d,
            killed_at_gamma: false,
            birth_events: vec![],
        };
        let mut root = mk(0, None, 0.0, 3.0);
        root.birth_events.push(BirthEvent {
            time: 1.0,
            children: vec![1, 2],
        });
        let f = Forest {
            individuals: vec![root, mk(1, Some(0), 1.0, 3.5), mk(2, Some(0), 1.0, 1.5)],
            roots: vec![0],
            gamma: 10.0,
        };
        f.validate().unwrap();
        let p = population_path(&f);
        assert_eq!(p.initial(), 1);
        assert_eq!(p.count_at(1.0), 3);
        assert_eq!(p.jumps().next(), Some(2));
        assert_eq!(p.count_at(4.0), 0);
    }

    #[test]
    fn absorbed_at_zero() {
        let p = ModelParams::new(OffspringLaw::binary(), 1.0, 1.0, 10.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let path = gillespie_population(&p, 0, &mut rng, 10).unwrap();
        assert_eq!(path.counts, vec![0]);
    }

    #[test]
    fn path_validity() {
        let law = OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).unwrap();
        let p = ModelParams::new(law.clone(), 1.0, 1.8, 4.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..200 {
            let path = gillespie_population(&p, 5, &mut rng, DEFAULT_EVENT_CAP).unwrap();
            for j in path.jumps() {
                assert!(j == -1 || law.support().contains(&(j as u32)), "{j}");
            }
            if let Some(pos) = path.counts.iter().position(|&z| z == 0) {
                assert_eq!(pos, path.counts.len() - 1);
            }
            assert!(path.times.iter().all(|&t| t < 4.0));
        }
    }

    #[test]
    fn pure_death_mean() {
        let p = ModelParams::new(OffspringLaw::binary(), 1e-12, 1.0, f64::INFINITY).unwrap();
        let mut rng = RngStream::new(3, 0);
        let reps = 20_000;
        let t = 0.7;
        let xs: Vec<f64> = (0..reps)
            .map(|_| gillespie_endpoints(&p, 5, &[t], &mut rng, 100).unwrap()[0] as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let q = (-t).exp();
        let se = (5.0 * q * (1.0 - q) / reps as f64).sqrt();
        assert!((mean - 5.0 * q).abs() < 5.0 * se);
    }

    #[test]
    fn endpoints_match_path() {
        let p = ModelParams::new(OffspringLaw::binary(), 1.0, 1.1, 3.0).unwrap();
        let times = [0.0, 0.5, 1.0, 2.5];
        let mut a = RngStream::new(4, 7);
        let mut b = RngStream::new(4, 7);
        for _ in 0..100 {
            // both consume the same draws while the chain is below the last time
            let e = gillespie_endpoints(&p, 3, &times, &mut a, 10_000).unwrap();
            let path = gillespie_population(&p, 3, &mut b, 10_000).unwrap();
            let want: Vec<u64> = times.iter().map(|&t| path.count_at(t)).collect();
            assert_eq!(e, want);
            a = b.clone();
        }
    }

    #[test]
    fn forest_and_chain_totals_agree() {
        let law = OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).unwrap();
        let p = ModelParams::new(law, 0.9, 2.0, 1.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let reps = 20_000;
        let mut tree_z = 0.0;
        let mut chain_z = 0.0;
        for _ in 0..reps {
            let f = simulate_forest(3, &p, &mut rng, TreeCaps::default()).unwrap();
            tree_z += population_path(&f).count_at(0.5) as f64;
            chain_z += gillespie_endpoints(&p, 3, &[0.5], &mut rng, 10_000).unwrap()[0] as f64;
        }
        let expect = 3.0 * ((0.9 * 2.0 - 2.0) * 0.5f64).exp();
        for m in [tree_z / reps as f64, chain_z / reps as f64] {
            assert!((m - expect).abs() < 0.05, "{m} vs {expect}");
        }
    }

    #[test]
    fn deaths_before_gamma_equal_down_jumps() {
        let law = OffspringLaw::from_pmf([(1, 0.5), (2, 0.5)]).unwrap();
        let p = ModelParams::new(law, 1.0, 1.4, 2.0).unwrap();
        let mut rng = RngStream::new(6, 0);
        for _ in 0..300 {
            let f = simulate_forest(4, &p, &mut rng, TreeCaps::default()).unwrap();
            let deaths = f.individuals.iter().filter(|i| !i.killed_at_gamma).count();
            let downs = population_path(&f).jumps().filter(|&j| j < 0).count();
            // simultaneous births and deaths have probability zero
            assert_eq!(deaths, downs);
        }
    }

    #[test]
    fn linear_birth_death_moments() {
        let (lambda, mu, z0, t) = (2.0, 1.5, 4u64, 0.8);
        let mut rng = RngStream::new(7, 0);
        let reps = 100_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| linear_birth_death_sample(lambda, mu, z0, t, &mut rng).unwrap() as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let r: f64 = lambda - mu;
        let e = (r * t).exp();
        let want = z0 as f64 * e;
        let var = z0 as f64 * (lambda + mu) / r * e * (e - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!((mean - want).abs() < 5.0 * se, "{mean} vs {want}");
        assert_eq!(linear_birth_death_sample(1.0, 1.0, 0, 1.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn rescaling() {
        let f = lone(1.0, 2.0);
        let p = population_path(&f);
        assert_eq!(rescale_path(&p, 1).unwrap(), p);
        let mut q = p.clone();
        q.counts[0] = 23;
        assert_eq!(rescale_path(&q, 10).unwrap().value_at(0.0), 2.3);
        assert!(rescale_path(&q, 0).is_err());
        let x = std::f64::consts::PI / 3.0;
        for (n, tol) in [(10u32, 0.1), (100, 0.01), (1000, 0.001)] {
            let s = ScalingParams::new(n, x, 1.0, 0.0, 0.0, OffspringLaw::binary()).unwrap();
            assert!((s.initial_mass() - x).abs() < tol);
        }
    }
}
