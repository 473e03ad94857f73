use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::{ModelParams, RngStream};

/// A birth event: `children.len() >= 1` individuals born at `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthEvent {
    pub time: f64,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: usize,
    pub parent: Option<usize>,
    #[serde(rename = "birth")]
    pub birth_time: f64,
    #[serde(rename = "death")]
    pub death_time: f64,
    #[serde(rename = "killed")]
    pub killed_at_gamma: bool,
    /// Sorted by increasing time.
    #[serde(rename = "events")]
    pub birth_events: Vec<BirthEvent>,
}

impl Individual {
    fn newborn(id: usize, parent: Option<usize>, birth_time: f64) -> Self {
        Self {
            id,
            parent,
            birth_time,
            death_time: f64::NAN,
            killed_at_gamma: false,
            birth_events: Vec::new(),
        }
    }

    pub fn lifetime(&self) -> f64 {
        self.death_time - self.birth_time
    }

    pub fn offspring_count(&self) -> usize {
        self.birth_events.iter().map(|e| e.children.len()).sum()
    }
}

/// Individuals indexed by id (`individuals[i].id == i`). A tree is a forest
/// with a single root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub individuals: Vec<Individual>,
    pub roots: Vec<usize>,
    #[serde(with = "crate::stochastic::horizon_serde")]
    pub gamma: f64,
}

pub type Tree = Forest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeCaps {
    pub max_nodes: usize,
}

impl Default for TreeCaps {
    fn default() -> Self {
        Self {
            max_nodes: 1_000_000,
        }
    }
}

/// Grows one tree depth-first with an explicit work stack; individuals alive
/// at `gamma` get `death_time = gamma` and `killed_at_gamma = true`.
pub fn simulate_tree(params: &ModelParams, rng: &mut RngStream, caps: TreeCaps) -> Result<Tree> {
    let mut individuals = Vec::new();
    grow(params, rng, caps, &mut individuals)?;
    Ok(Forest {
        individuals,
        roots: vec![0],
        gamma: params.gamma,
    })
}

/// `m` independent trees drawn in sequence from `rng`, ids disjoint.
pub fn simulate_forest(
    m: usize,
    params: &ModelParams,
    rng: &mut RngStream,
    caps: TreeCaps,
) -> Result<Forest> {
    if m == 0 {
        return Err(Error::param("m", "a forest needs at least one tree"));
    }
    let mut individuals = Vec::new();
    let mut roots = Vec::with_capacity(m);
    for _ in 0..m {
        roots.push(individuals.len());
        grow(params, rng, caps, &mut individuals)?;
    }
    Ok(Forest {
        individuals,
        roots,
        gamma: params.gamma,
    })
}

fn grow(
    params: &ModelParams,
    rng: &mut RngStream,
    caps: TreeCaps,
    individuals: &mut Vec<Individual>,
) -> Result<()> {
    if caps.max_nodes == 0 {
        return Err(Error::param("max_nodes", "must be >= 1"));
    }
    let check = |len: usize| {
        if len > caps.max_nodes {
            Err(Error::CapExceeded {
                cap: caps.max_nodes,
                partial: len,
            })
        } else {
            Ok(())
        }
    };
    let root = individuals.len();
    individuals.push(Individual::newborn(root, None, 0.0));
    check(individuals.len())?;
    let mut work = vec![root];
    while let Some(id) = work.pop() {
        let birth = individuals[id].birth_time;
        let end = birth + rng.exp(params.mu);
        let (death, killed) = if end >= params.gamma {
            (params.gamma, true)
        } else {
            (end, false)
        };
        let mut events = Vec::new();
        let mut t = birth + rng.exp(params.lambda);
        while t < death {
            let batch = params.offspring.sample(rng) as usize;
            let first = individuals.len();
            for c in 0..batch {
                individuals.push(Individual::newborn(first + c, Some(id), t));
            }
            check(individuals.len())?;
            events.push(BirthEvent {
                time: t,
                children: (first..first + batch).collect(),
            });
            t += rng.exp(params.lambda);
        }
        for ev in events.iter().rev() {
            work.extend(ev.children.iter().rev());
        }
        let ind = &mut individuals[id];
        ind.death_time = death;
        ind.killed_at_gamma = killed;
        ind.birth_events = events;
    }
    Ok(())
}

impl Forest {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Individual> {
        self.individuals.get(id)
    }

    /// Number of individuals alive at `t`: `birth <= t < death`.
    pub fn alive_at(&self, t: f64) -> u64 {
        self.individuals
            .iter()
            .filter(|i| i.birth_time <= t && t < i.death_time)
            .count() as u64
    }

    /// Total number of children over all individuals.
    pub fn total_offspring(&self) -> usize {
        self.individuals.iter().map(Individual::offspring_count).sum()
    }

    /// Checks parent/child links, time ordering and the horizon rule.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedTree(msg));
        if self.roots.is_empty() {
            return bad("no roots".into());
        }
        let mut seen_as_child = vec![false; self.individuals.len()];
        for (pos, ind) in self.individuals.iter().enumerate() {
            if ind.id != pos {
                return bad(format!("individual at position {pos} has id {}", ind.id));
            }
            if !(ind.birth_time < ind.death_time) || ind.death_time > self.gamma {
                return bad(format!(
                    "individual {pos}: need birth < death <= gamma, got {} / {}",
                    ind.birth_time, ind.death_time
                ));
            }
            if ind.killed_at_gamma != (ind.death_time == self.gamma) {
                return bad(format!("individual {pos}: killed flag disagrees with death time"));
            }
            let mut prev = ind.birth_time;
            for ev in &ind.birth_events {
                if !(ev.time > prev && ev.time < ind.death_time) {
                    return bad(format!("individual {pos}: event at {} out of order", ev.time));
                }
                prev = ev.time;
                if ev.children.is_empty() {
                    return bad(format!("individual {pos}: empty birth event"));
                }
                for &c in &ev.children {
                    let Some(child) = self.individuals.get(c) else {
                        return bad(format!("individual {pos}: unknown child {c}"));
                    };
                    if child.parent != Some(pos) || child.birth_time != ev.time {
                        return bad(format!("child {c} does not match its birth event"));
                    }
                    if std::mem::replace(&mut seen_as_child[c], true) {
                        return bad(format!("child {c} listed twice"));
                    }
                }
            }
        }
        let mut is_root = vec![false; self.individuals.len()];
        for &r in &self.roots {
            match is_root.get_mut(r) {
                Some(flag) if !*flag => *flag = true,
                _ => return bad(format!("root {r} unknown or repeated")),
            }
        }
        for (pos, ind) in self.individuals.iter().enumerate() {
            let is_root = is_root[pos];
            if is_root != ind.parent.is_none() || is_root == seen_as_child[pos] {
                return bad(format!("individual {pos}: inconsistent root/parent status"));
            }
            if is_root && ind.birth_time != 0.0 {
                return bad(format!("root {pos} not born at 0"));
            }
        }
        Ok(())
    }

    /// Contour order: each individual, then its birth events from the most
    /// recent down, each event's children in index order with their whole
    /// progeny before the next sibling.
    pub fn exploration_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.individuals.len());
        // stack of individuals still to visit, top = next
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(id) = stack.pop() {
            order.push(id);
            // latest event is explored first, so it must end on top
            for ev in &self.individuals[id].birth_events {
                stack.extend(ev.children.iter().rev());
            }
        }
        order
    }

    /// Relabels ids in exploration order.
    pub fn canonicalize(&self) -> Forest {
        let order = self.exploration_order();
        let mut new_id = vec![0usize; self.individuals.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let individuals = order
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let ind = &self.individuals[old];
                Individual {
                    id: new,
                    parent: ind.parent.map(|p| new_id[p]),
                    birth_time: ind.birth_time,
                    death_time: ind.death_time,
                    killed_at_gamma: ind.killed_at_gamma,
                    birth_events: ind
                        .birth_events
                        .iter()
                        .map(|e| BirthEvent {
                            time: e.time,
                            children: e.children.iter().map(|&c| new_id[c]).collect(),
                        })
                        .collect(),
                }
            })
            .collect();
        Forest {
            individuals,
            roots: self.roots.iter().map(|&r| new_id[r]).collect(),
            gamma: self.gamma,
        }
    }

    /// One JSON object per individual, preceded by a header line carrying
    /// the horizon.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = serde_json::json!({
            "gamma": if self.gamma.is_finite() { serde_json::json!(self.gamma) } else { serde_json::json!("inf") },
            "roots": self.roots,
        });
        writeln!(w, "{header}")?;
        for ind in &self.individuals {
            writeln!(w, "{}", serde_json::to_string(ind).map_err(std::io::Error::other)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Forest> {
        #[derive(Deserialize)]
        struct Header {
            #[serde(with = "crate::stochastic::horizon_serde")]
            gamma: f64,
            roots: Vec<usize>,
        }
        let mut lines = r.lines().enumerate().filter(|(_, l)| {
            l.as_ref()
                .map(|s| !s.trim().is_empty() && !s.starts_with('#'))
                .unwrap_or(true)
        });
        let parse_err = |line: usize, reason: String| Error::Parse {
            line: line + 1,
            reason,
        };
        let (hl, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing header".into()))?;
        let header = header.map_err(|e| parse_err(hl, e.to_string()))?;
        let header: Header =
            serde_json::from_str(&header).map_err(|e| parse_err(hl, e.to_string()))?;
        let mut individuals = Vec::new();
        for (ln, line) in lines {
            let line = line.map_err(|e| parse_err(ln, e.to_string()))?;
            let ind: Individual =
                serde_json::from_str(&line).map_err(|e| parse_err(ln, e.to_string()))?;
            individuals.push(ind);
        }
        let forest = Forest {
            individuals,
            roots: header.roots,
            gamma: header.gamma,
        };
        forest.validate()?;
        Ok(forest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::OffspringLaw;

    fn law() -> OffspringLaw {
        OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).unwrap()
    }

    #[test]
    fn negligible_birth_rate_gives_single_individual() {
        let p = ModelParams::new(law(), 1e-12, 1.0, f64::INFINITY).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            let t = simulate_tree(&p, &mut rng, TreeCaps::default()).unwrap();
            assert_eq!(t.len(), 1);
            assert!(t.individuals[0].death_time > 0.0);
        }
    }

    #[test]
    fn killing_fraction_matches_survival() {
        let p = ModelParams::new(law(), 1.0, 1.0, 0.01).unwrap();
        let mut rng = RngStream::new(2, 0);
        let reps = 100_000;
        let killed = (0..reps)
            .filter(|_| {
                let t = simulate_tree(&p, &mut rng, TreeCaps::default()).unwrap();
                t.individuals[0].killed_at_gamma
            })
            .count();
        let expect = (-0.01f64).exp();
        let frac = killed as f64 / reps as f64;
        let se = (expect * (1.0 - expect) / reps as f64).sqrt();
        assert!((frac - expect).abs() < 5.0 * se, "{frac} vs {expect}");
    }

    #[test]
    fn forest_roots_and_validity() {
        let p = ModelParams::new(law(), 0.8, 2.0, 3.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        let m = (10.0f64 * 2.34).floor() as usize;
        let f = simulate_forest(m, &p, &mut rng, TreeCaps::default()).unwrap();
        assert_eq!(f.roots.len(), 23);
        assert_eq!(f.alive_at(0.0), 23);
        f.validate().unwrap();
        let one = simulate_forest(1, &p, &mut rng, TreeCaps::default()).unwrap();
        assert_eq!(one.roots, vec![0]);
        assert!(simulate_forest(0, &p, &mut rng, TreeCaps::default()).is_err());
    }

    #[test]
    fn cap_is_reported() {
        let p = ModelParams::new(law(), 5.0, 0.1, 50.0).unwrap();
        let mut rng = RngStream::new(4, 0);
        let err = simulate_tree(&p, &mut rng, TreeCaps { max_nodes: 100 }).unwrap_err();
        match err {
            Error::CapExceeded { cap, partial } => {
                assert_eq!(cap, 100);
                assert!(partial > 100);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let p = ModelParams::new(law(), 1.0, 1.5, 2.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let f = simulate_forest(3, &p, &mut rng, TreeCaps::default()).unwrap();
        let mut buf = Vec::new();
        f.write_jsonl(&mut buf).unwrap();
        let back = Forest::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn validate_catches_bad_links() {
        let p = ModelParams::new(law(), 2.0, 1.0, 2.0).unwrap();
        let mut rng = RngStream::new(6, 0);
        let mut f = loop {
            let f = simulate_tree(&p, &mut rng, TreeCaps::default()).unwrap();
            if f.len() > 3 {
                break f;
            }
        };
        f.validate().unwrap();
        f.individuals[1].parent = None;
        assert!(f.validate().is_err());
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let p = ModelParams::new(law(), 1.2, 1.5, 2.0).unwrap();
        let mut rng = RngStream::new(7, 0);
        let f = simulate_forest(4, &p, &mut rng, TreeCaps::default()).unwrap();
        let c = f.canonicalize();
        c.validate().unwrap();
        assert_eq!(c.canonicalize(), c);
        assert_eq!(c.len(), f.len());
    }
}
