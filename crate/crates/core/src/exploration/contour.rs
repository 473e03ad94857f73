use super::{ClockConvention, Excursion, HeightPath, MinimumTag};
use crate::branching::{BirthEvent, Forest, Individual};
use crate::error::{Error, Result};

enum Pending<'a> {
    /// Birth event `idx` of `owner`, not yet reached by the descent.
    Event { owner: usize, idx: usize },
    /// Children of an event still to be explored, from `next` on.
    Siblings { level: f64, children: &'a [usize], next: usize },
}

/// Depth-first contour of `forest` with slope `p`, one excursion per root.
///
/// After climbing an individual's lifeline the path descends to its most
/// recent unexplored birth event, explores the children of that event in
/// index order (returning to the event level between them), then keeps
/// descending.
pub fn contour_of_tree(forest: &Forest, p: f64) -> Result<HeightPath> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param("p", format!("slope must be > 0, got {p}")));
    }
    forest.validate()?;
    let inds = &forest.individuals;
    let mut excursions = Vec::with_capacity(forest.roots.len());
    let mut stack: Vec<Pending> = Vec::new();
    for &root in &forest.roots {
        let mut exc = Excursion::default();
        let mut cur = root;
        loop {
            let ind = &inds[cur];
            exc.maxima.push(ind.death_time);
            stack.extend((0..ind.birth_events.len()).map(|idx| Pending::Event { owner: cur, idx }));
            match stack.last_mut() {
                None => {
                    exc.minima.push(0.0);
                    exc.tags.push(MinimumTag::ExcursionEnd);
                    break;
                }
                Some(Pending::Event { owner, idx }) => {
                    let ev = &inds[*owner].birth_events[*idx];
                    stack.pop();
                    exc.minima.push(ev.time);
                    exc.tags.push(MinimumTag::NewBirthEvent {
                        batch: ev.children.len() as u32,
                    });
                    if ev.children.len() > 1 {
                        stack.push(Pending::Siblings {
                            level: ev.time,
                            children: &ev.children,
                            next: 1,
                        });
                    }
                    cur = ev.children[0];
                }
                Some(Pending::Siblings { level, children, next }) => {
                    exc.minima.push(*level);
                    exc.tags.push(MinimumTag::SiblingRevisit);
                    cur = children[*next];
                    *next += 1;
                    if *next == children.len() {
                        stack.pop();
                    }
                }
            }
        }
        excursions.push(exc);
    }
    Ok(HeightPath {
        excursions,
        gamma: forest.gamma,
        clock: ClockConvention::TreeClock { slope: p },
    })
}

/// Inverse of [`contour_of_tree`]. Ids come out in exploration order, so the
/// result equals `forest.canonicalize()` for the forest that produced the
/// path. Untagged excursions are tagged first by exact level matching.
pub fn tree_of_contour(path: &HeightPath) -> Result<Forest> {
    let tagged;
    let path = if path.is_tagged() {
        path
    } else {
        tagged = infer_tags(path, 0.0)?;
        &tagged
    };
    path.validate()?;
    let mut inds: Vec<Individual> = Vec::with_capacity(path.num_maxima());
    let mut roots = Vec::with_capacity(path.excursions.len());
    // open sibling groups: (level, owner, event index in discovery order, batch)
    let mut groups: Vec<(f64, usize, usize, u32)> = Vec::new();
    let mut spine: Vec<usize> = Vec::new();
    let newborn = |inds: &mut Vec<Individual>, parent, birth| {
        let id = inds.len();
        inds.push(Individual {
            id,
            parent,
            birth_time: birth,
            death_time: f64::NAN,
            killed_at_gamma: false,
            birth_events: Vec::new(),
        });
        id
    };
    for (e, exc) in path.excursions.iter().enumerate() {
        let offset = path.offset_of(e);
        let root = newborn(&mut inds, None, 0.0);
        roots.push(root);
        spine.clear();
        spine.push(root);
        for (l, ((big, small), tag)) in exc.extrema().zip(&exc.tags).enumerate() {
            let bad = |reason: String| Error::MalformedPath {
                index: offset + 2 * l + 1,
                reason,
            };
            let cur = *spine.last().unwrap();
            inds[cur].death_time = big;
            inds[cur].killed_at_gamma = big == path.gamma;
            match *tag {
                MinimumTag::ExcursionEnd => break,
                MinimumTag::NewBirthEvent { batch } => {
                    while inds[*spine.last().unwrap()].birth_time >= small {
                        spine.pop();
                    }
                    let owner = *spine.last().unwrap();
                    if let Some(prev) = inds[owner].birth_events.last() {
                        if prev.time <= small {
                            return Err(bad(format!(
                                "event at {small} above an explored event of individual {owner}"
                            )));
                        }
                    }
                    let child = newborn(&mut inds, Some(owner), small);
                    inds[owner].birth_events.push(BirthEvent {
                        time: small,
                        children: vec![child],
                    });
                    if batch > 1 {
                        groups.push((small, owner, inds[owner].birth_events.len() - 1, batch));
                    }
                    spine.push(child);
                }
                MinimumTag::SiblingRevisit => {
                    let &(level, owner, idx, batch) = groups
                        .last()
                        .ok_or_else(|| bad("revisit without a pending event".into()))?;
                    while inds[*spine.last().unwrap()].birth_time >= level {
                        spine.pop();
                    }
                    let child = newborn(&mut inds, Some(owner), level);
                    let ev = &mut inds[owner].birth_events[idx];
                    ev.children.push(child);
                    spine.push(child);
                    if ev.children.len() as u32 == batch {
                        groups.pop();
                    }
                }
            }
        }
        if !groups.is_empty() {
            return Err(Error::MalformedPath {
                index: offset + 2 * exc.len() - 1,
                reason: "excursion ends with pending siblings".into(),
            });
        }
    }
    for ind in &mut inds {
        ind.birth_events.reverse();
    }
    let forest = Forest {
        individuals: inds,
        roots,
        gamma: path.gamma,
    };
    forest.validate()?;
    Ok(forest)
}

/// Tags every untagged excursion: a minimum within `tol` of the deepest
/// pending event level is a sibling revisit, a higher one opens a new event,
/// a lower one closes pending events first. Batch sizes are 1 + revisits.
pub fn infer_tags(path: &HeightPath, tol: f64) -> Result<HeightPath> {
    if !(tol >= 0.0) {
        return Err(Error::param("tol", "must be >= 0"));
    }
    let mut out = path.clone();
    for exc in out.excursions.iter_mut().filter(|e| !e.is_tagged()) {
        let k = exc.len();
        let mut tags = vec![MinimumTag::ExcursionEnd; k];
        // (level, position of the opening minimum, revisits so far)
        let mut open: Vec<(f64, usize, u32)> = Vec::new();
        let close = |tags: &mut Vec<MinimumTag>, (_, at, revisits): (f64, usize, u32)| {
            tags[at] = MinimumTag::NewBirthEvent { batch: 1 + revisits };
        };
        for l in 0..k {
            let m = exc.minima[l];
            if l + 1 == k {
                while let Some(g) = open.pop() {
                    close(&mut tags, g);
                }
                break;
            }
            while let Some(&g) = open.last() {
                if m < g.0 - tol {
                    open.pop();
                    close(&mut tags, g);
                } else {
                    break;
                }
            }
            match open.last_mut() {
                Some(g) if (m - g.0).abs() <= tol => {
                    g.2 += 1;
                    tags[l] = MinimumTag::SiblingRevisit;
                    // keep stored levels bit-equal within a group
                    exc.minima[l] = g.0;
                }
                _ => open.push((m, l, 0)),
            }
        }
        exc.tags = tags;
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{simulate_forest, simulate_tree, TreeCaps};
    use crate::exploration::path::tests::three_peak;
    use crate::stochastic::{ModelParams, OffspringLaw, RngStream};

    fn two_children() -> Forest {
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
        Forest {
            individuals: vec![root, mk(1, Some(0), 1.0, 3.0), mk(2, Some(0), 1.0, 1.5)],
            roots: vec![0],
            gamma: f64::INFINITY,
        }
    }

    #[test]
    fn lone_individual() {
        let f = Forest {
            individuals: vec![Individual {
                id: 0,
                parent: None,
                birth_time: 0.0,
                death_time: 3.0,
                killed_at_gamma: false,
                birth_events: vec![],
            }],
            roots: vec![0],
            gamma: 5.0,
        };
        let p = contour_of_tree(&f, 1.0).unwrap();
        assert_eq!(p.excursions[0].maxima, vec![3.0]);
        assert_eq!(p.excursions[0].minima, vec![0.0]);
        assert_eq!(tree_of_contour(&p).unwrap(), f);
    }

    #[test]
    fn hand_traced_example() {
        let p = contour_of_tree(&two_children(), 2.0).unwrap();
        assert_eq!(p, three_peak());
        assert_eq!(tree_of_contour(&p).unwrap(), two_children());
    }

    #[test]
    fn untagged_input_is_inferred() {
        let mut p = three_peak();
        p.excursions[0].tags.clear();
        assert_eq!(infer_tags(&p, 0.0).unwrap(), three_peak());
        assert_eq!(tree_of_contour(&p).unwrap(), two_children());
        // a nearby but unequal level only matches with a tolerance
        p.excursions[0].minima[1] = 1.0 + 1e-12;
        let strict = infer_tags(&p, 0.0).unwrap();
        assert_eq!(strict.excursions[0].tags[0], MinimumTag::NewBirthEvent { batch: 1 });
        let loose = infer_tags(&p, 1e-9).unwrap();
        assert_eq!(loose, three_peak());
    }

    #[test]
    fn inconsistent_tags_error() {
        let mut p = three_peak();
        p.excursions[0].tags[0] = MinimumTag::NewBirthEvent { batch: 3 };
        assert!(matches!(
            tree_of_contour(&p),
            Err(Error::MalformedPath { index: 5, .. })
        ));
    }

    #[test]
    fn roundtrip_random_trees() {
        let law = OffspringLaw::from_pmf([(1, 0.4), (2, 0.3), (4, 0.3)]).unwrap();
        let mut rng = RngStream::new(9, 0);
        for (lambda, mu) in [(0.5, 1.5), (1.0, 2.1), (1.5, 1.0)] {
            let params = ModelParams::new(law.clone(), lambda, mu, 1.0).unwrap();
            for _ in 0..300 {
                let t = simulate_tree(&params, &mut rng, TreeCaps::default()).unwrap();
                let back = tree_of_contour(&contour_of_tree(&t, 1.0).unwrap()).unwrap();
                assert_eq!(back, t.canonicalize());
            }
        }
        let params = ModelParams::new(law, 1.0, 2.1, 2.0).unwrap();
        let f = simulate_forest(5, &params, &mut rng, TreeCaps::default()).unwrap();
        let back = tree_of_contour(&contour_of_tree(&f, 3.0).unwrap()).unwrap();
        assert_eq!(back, f.canonicalize());
    }
}
