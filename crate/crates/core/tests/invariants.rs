use branch_contour::branching::gillespie_endpoints;
use branch_contour::exploration::{infer_tags, DEFAULT_EXTREMA_CAP};
use branch_contour::stats::{ks_critical_value, ks_two_sample_values, KS_ALPHA};
use branch_contour::stochastic::{last_point_before, poisson_points, splice};
use branch_contour::{
    contour_of_tree, crossing_pairs, explore_direct, local_time, population_path, simulate_forest, tree_of_contour,
    Error, Forest, HeightPath, MinimumTag, ModelParams, OffspringLaw, RngStream, ScalingParams, TreeCaps,
};
use proptest::prelude::*;

const SMALL: TreeCaps = TreeCaps { max_nodes: 20_000 };

fn law() -> impl Strategy<Value = OffspringLaw> {
    prop::collection::btree_map(1u32..6, 0.05f64..1.0, 1..4).prop_map(|m| {
        let total: f64 = m.values().sum();
        let mut pmf: Vec<(u32, f64)> = m.into_iter().map(|(k, w)| (k, w / total)).collect();
        // absorb rounding into the last mass so the pmf sums to one
        let head: f64 = pmf[..pmf.len() - 1].iter().map(|p| p.1).sum();
        pmf.last_mut().unwrap().1 = 1.0 - head;
        OffspringLaw::from_pmf(pmf).unwrap()
    })
}

fn model() -> impl Strategy<Value = ModelParams> {
    (law(), 0.1f64..1.5, 0.3f64..3.0, 0.3f64..3.0)
        .prop_map(|(law, lambda, mu, gamma)| ModelParams::new(law, lambda, mu, gamma).unwrap())
}

/// Forest from `seed`, or `None` when it outgrows [`SMALL`].
fn forest(m: usize, params: &ModelParams, seed: u64) -> Option<Forest> {
    let mut rng = RngStream::new(seed, 0);
    match simulate_forest(m, params, &mut rng, SMALL) {
        Ok(f) => Some(f),
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

/// Each new birth event of batch `b` is followed by `b - 1` sibling
/// revisits at the same level.
fn reflection_count_holds(path: &HeightPath) -> bool {
    for exc in &path.excursions {
        for (i, tag) in exc.tags.iter().enumerate() {
            if let MinimumTag::NewBirthEvent { batch } = *tag {
                let level = exc.minima[i];
                let revisits = exc.minima[i + 1..]
                    .iter()
                    .zip(&exc.tags[i + 1..])
                    .take_while(|(&m, _)| m >= level)
                    .filter(|(&m, t)| m == level && **t == MinimumTag::SiblingRevisit)
                    .count();
                if revisits != batch as usize - 1 {
                    return false;
                }
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn offspring_constants_recompute_exactly(law in law()) {
        let (a, z, d) = law.recompute_constants();
        prop_assert_eq!(a.to_bits(), law.mean().to_bits());
        prop_assert_eq!(z.to_bits(), law.zeta2().to_bits());
        prop_assert_eq!(d.to_bits(), law.delta().to_bits());
    }

    #[test]
    fn drift_is_alpha_minus_beta(
        law in law(),
        n in prop::sample::select(vec![1u32, 10, 100, 1000]),
        sigma in prop::sample::select(vec![0.5, 1.0, 2.0]),
        alpha in 0.0f64..3.0,
        beta in 0.0f64..3.0,
    ) {
        let s = ScalingParams::new(n, 1.0, sigma, alpha, beta, law).unwrap();
        let a = s.offspring.mean();
        prop_assert!((a * s.lambda_n - s.mu_n - (alpha - beta)).abs() <= 1e-12 * (1.0 + s.mu_n));
    }

    #[test]
    fn splice_keeps_prefix(seed: u64, m in 0.0f64..10.0, rate in 0.2f64..4.0) {
        let mut rng = RngStream::new(seed, 1);
        let pts = poisson_points(rate, 20.0, &mut rng).unwrap();
        let fresh = poisson_points(rate, 5.0, &mut rng).unwrap();
        let (r, k) = last_point_before(&pts, m).unwrap();
        let sp = splice(&pts, m, &fresh).unwrap();
        for j in 0..k {
            prop_assert_eq!(sp.get(j), pts.get(j));
        }
        // the origin is fixed, so with K = 0 the fresh points start at index 1
        prop_assert_eq!(sp.get(k.max(1)), fresh.get(1).map(|f| r + f));
    }

    #[test]
    fn streams_are_reproducible(seed: u64, id: u64) {
        let mut a = RngStream::new(seed, id);
        let mut b = RngStream::new(seed, id);
        for _ in 0..32 {
            prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            prop_assert_eq!(a.exp(1.3).to_bits(), b.exp(1.3).to_bits());
        }
    }

    #[test]
    fn population_path_is_valid_and_conserves_deaths(p in model(), m in 1usize..5, seed: u64) {
        let Some(f) = forest(m, &p, seed) else { return Ok(()) };
        let path = population_path(&f);
        prop_assert_eq!(path.initial(), m as u64);
        let support = p.offspring.support();
        let mut deaths = 0;
        for j in path.jumps() {
            prop_assert!(j == -1 || (j > 0 && support.contains(&(j as u32))), "jump {}", j);
            deaths += (j == -1) as usize;
        }
        if let Some(z) = path.counts.iter().position(|&c| c == 0) {
            prop_assert!(path.counts[z..].iter().all(|&c| c == 0));
        }
        let died = f.individuals.iter().filter(|i| !i.killed_at_gamma).count();
        prop_assert_eq!(deaths, died);
    }

    #[test]
    fn bijection_roundtrip(p in model(), m in 1usize..4, seed: u64) {
        let Some(f) = forest(m, &p, seed) else { return Ok(()) };
        let path = contour_of_tree(&f, 1.0).unwrap();
        prop_assert_eq!(tree_of_contour(&path).unwrap(), f.canonicalize());
        let mut bare = path.clone();
        for e in &mut bare.excursions {
            e.tags.clear();
        }
        prop_assert_eq!(&infer_tags(&bare, 0.0).unwrap(), &path);
    }

    #[test]
    fn reflection_count_in_generated_paths(p in model(), m in 1usize..4, seed: u64) {
        let mut rng = RngStream::new(seed, 2);
        let direct = explore_direct(&p, m, &mut rng, DEFAULT_EXTREMA_CAP).unwrap();
        prop_assert!(reflection_count_holds(&direct));
        if let Some(f) = forest(m, &p, seed) {
            prop_assert!(reflection_count_holds(&contour_of_tree(&f, 1.0).unwrap()));
        }
    }

    #[test]
    fn crossings_count_the_living(p in model(), m in 1usize..4, seed: u64, u in prop::collection::vec(0.0f64..1.0, 8)) {
        let Some(f) = forest(m, &p, seed) else { return Ok(()) };
        let path = contour_of_tree(&f, 2.0).unwrap();
        for x in u {
            let t = x * p.gamma;
            prop_assert_eq!(crossing_pairs(&path, t), f.alive_at(t));
        }
    }

    #[test]
    fn local_time_is_right_continuous(p in model(), seed: u64, x in 0.0f64..1.0) {
        let mut rng = RngStream::new(seed, 3);
        let path = explore_direct(&p, 2, &mut rng, DEFAULT_EXTREMA_CAP).unwrap();
        let t = x * p.gamma;
        let on_extremum = path.excursions.iter().any(|e| e.maxima.contains(&t) || e.minima.contains(&t));
        prop_assume!(!on_extremum);
        let at = local_time(&path, t, None).raw_pairs;
        let mut eps = 1e-3;
        let mut last = None;
        for _ in 0..12 {
            last = Some(local_time(&path, t + eps, None).raw_pairs);
            eps /= 10.0;
        }
        prop_assert_eq!(last, Some(at));
    }

    #[test]
    fn paths_stop_at_gamma(p in model(), m in 1usize..4, seed: u64) {
        let Some(f) = forest(m, &p, seed) else { return Ok(()) };
        let path = contour_of_tree(&f, 1.0).unwrap();
        let at_gamma = path
            .excursions
            .iter()
            .flat_map(|e| &e.maxima)
            .filter(|&&h| {
                assert!(h <= p.gamma);
                h == p.gamma
            })
            .count();
        prop_assert_eq!(at_gamma, f.individuals.iter().filter(|i| i.killed_at_gamma).count());

        let mut rng = RngStream::new(seed, 4);
        let direct = explore_direct(&p, m, &mut rng, DEFAULT_EXTREMA_CAP).unwrap();
        prop_assert!(direct.max_height() <= p.gamma);
    }

    #[test]
    fn ks_symmetric_and_rank_based(
        a in prop::collection::vec(-5.0f64..5.0, 1..60),
        b in prop::collection::vec(-5.0f64..5.0, 1..60),
    ) {
        let d = ks_two_sample_values(&a, &b).unwrap().d;
        prop_assert_eq!(d, ks_two_sample_values(&b, &a).unwrap().d);
        let f = |x: &f64| x.exp() * 3.0 + 1.0;
        let ta: Vec<f64> = a.iter().map(f).collect();
        let tb: Vec<f64> = b.iter().map(f).collect();
        prop_assert!((ks_two_sample_values(&ta, &tb).unwrap().d - d).abs() < 1e-12);
    }
}

#[test]
fn forest_and_gillespie_agree_in_law() {
    let law = OffspringLaw::from_pmf([(1, 0.6), (2, 0.4)]).unwrap();
    let p = ModelParams::new(law, 0.9, 1.4, 2.0).unwrap();
    let grid = [0.5, 1.0, 1.5];
    let reps = 10_000;
    let from_trees = branch_contour::parallel::replicate(11, 1, reps, |_, rng| {
        let f = simulate_forest(3, &p, rng, TreeCaps::default()).unwrap();
        let path = population_path(&f);
        grid.map(|t| path.count_at(t) as f64)
    });
    let from_chain = branch_contour::parallel::replicate(11, 2, reps, |_, rng| {
        let z = gillespie_endpoints(&p, 3, &grid, rng, usize::MAX).unwrap();
        [z[0] as f64, z[1] as f64, z[2] as f64]
    });
    let crit = ks_critical_value(reps, Some(reps), KS_ALPHA);
    for j in 0..grid.len() {
        let a: Vec<f64> = from_trees.iter().map(|v| v[j]).collect();
        let b: Vec<f64> = from_chain.iter().map(|v| v[j]).collect();
        let d = ks_two_sample_values(&a, &b).unwrap().d;
        assert!(d <= crit, "t={} D={d} crit={crit}", grid[j]);
    }
}
