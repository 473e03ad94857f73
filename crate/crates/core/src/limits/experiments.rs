use serde::{Deserialize, Serialize};
use serde_json::json;

use super::domain;
use super::{
    drop_capped, feller_euler_endpoint, feller_exact_sample, reflected_bm_sample, Comparison,
    ComparisonKind, ExperimentReport, FellerSpec, ReflectedBmSpec,
};
use crate::branching::{
    gillespie_endpoints, linear_birth_death_sample, population_path, simulate_forest, TreeCaps,
    DEFAULT_EVENT_CAP,
};
use crate::error::{Error, Result};
use crate::exploration::{
    contour_of_tree, crossing_pairs, explore_direct, height_at, local_time_profile,
    DEFAULT_EXTREMA_CAP,
};
use crate::parallel::replicate;
use crate::stats::{ks_critical_value, ks_two_sample_values, sample_moments, KS_ALPHA};
use crate::stochastic::ScalingParams;

/// Forests checked pathwise in [`rayknight_experiment`].
const PATHWISE_FORESTS: usize = 200;

/// Local time of the explored forest against the rescaled population at
/// each level of `t_grid`: `L(t)` of `floor(Nx)` trees versus
/// `4/(kappa^2 delta) X_t`, from independent streams. A pathwise check that
/// crossing counts equal `Z_t` on shared forests is included.
pub fn rayknight_experiment(
    scaling: &ScalingParams,
    gamma: f64,
    t_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    if !gamma.is_finite() {
        return Err(Error::param("gamma", "the identity in law is checked for finite gamma"));
    }
    if t_grid.iter().any(|&t| !(0.0..gamma).contains(&t)) {
        return Err(Error::param("t_grid", "levels must lie in [0, gamma)"));
    }
    if t_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("t_grid", "must be sorted"));
    }
    let model = scaling.tree_model(gamma)?;
    let z0 = scaling.initial_count();
    if z0 == 0 {
        return Err(Error::param("x0", "floor(N x) must be >= 1"));
    }
    let unit = scaling.local_time_unit;

    let side_a = replicate(seed, domain::RK_LOCAL_TIME, reps, |_, rng| {
        let path = explore_direct(&model, z0 as usize, rng, DEFAULT_EXTREMA_CAP)?;
        let prof = local_time_profile(&path, t_grid, Some(scaling))?;
        Ok(prof.iter().map(|v| v.normalized.unwrap()).collect::<Vec<f64>>())
    });
    let side_b = replicate(seed, domain::RK_POPULATION, reps, |_, rng| {
        let z = gillespie_endpoints(&model, z0, t_grid, rng, DEFAULT_EVENT_CAP)?;
        Ok(z.iter().map(|&c| c as f64 * unit).collect::<Vec<f64>>())
    });
    let (side_a, drop_a) = drop_capped(side_a)?;
    let (side_b, drop_b) = drop_capped(side_b)?;

    let mut report = ExperimentReport::new(
        "rayknight",
        json!({ "scaling": scaling, "gamma": gamma, "t_grid": t_grid, "reps": reps }),
        seed,
    );
    report.value("dropped_local_time", drop_a as f64);
    report.value("dropped_population", drop_b as f64);
    let crit = ks_critical_value(side_a.len(), Some(side_b.len()), KS_ALPHA);
    for (j, &t) in t_grid.iter().enumerate() {
        let a: Vec<f64> = side_a.iter().map(|v| v[j]).collect();
        let b: Vec<f64> = side_b.iter().map(|v| v[j]).collect();
        let ks = ks_two_sample_values(&a, &b)?;
        report.push(
            Comparison::new(format!("ks_t={t}"), ComparisonKind::Ks, ks.d, crit)
                .at_n(scaling.n_scale)
                .at_t(t)
                .sized(a.len(), b.len()),
        );
    }

    let forests = reps.min(PATHWISE_FORESTS);
    let mismatches = replicate(seed, domain::RK_PATHWISE, forests, |_, rng| {
        let forest = simulate_forest(z0 as usize, &model, rng, TreeCaps::default())?;
        let path = contour_of_tree(&forest, scaling.slope)?;
        let pop = population_path(&forest);
        Ok(t_grid
            .iter()
            .filter(|&&t| crossing_pairs(&path, t) != pop.count_at(t))
            .count())
    });
    let (mismatches, _) = drop_capped(mismatches)?;
    report.push(
        Comparison::new(
            "pathwise_crossings_eq_population",
            ComparisonKind::Exact,
            mismatches.iter().sum::<usize>() as f64,
            0.0,
        )
        .at_n(scaling.n_scale)
        .sized(mismatches.len(), mismatches.len()),
    );
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XConvergenceConfig {
    pub base: ScalingParams,
    pub n_list: Vec<u32>,
    pub t: f64,
    pub reps: usize,
    /// Gate on the KS statistic at the last `N`.
    pub final_ks: f64,
    /// Allowed increase of KS between consecutive `N`.
    pub trend_slack: f64,
    /// Largest `N` at which the exact birth-death sampler is cross-checked
    /// against the event-by-event chain.
    pub gillespie_check_up_to: u32,
}

/// `X_t^{N,x}` against exact Feller draws for each `N`.
///
/// With every batch of size one the population is a linear birth-death chain
/// and `Z_t` is drawn from its exact transition law, cross-checked against
/// the Gillespie chain for small `N`; other laws use the chain directly.
pub fn x_convergence_experiment(cfg: &XConvergenceConfig, seed: u64) -> Result<ExperimentReport> {
    if cfg.n_list.is_empty() {
        return Err(Error::param("n_list", "must not be empty"));
    }
    if !(cfg.t > 0.0) {
        return Err(Error::param("t", "must be > 0"));
    }
    let base = &cfg.base;
    let spec = FellerSpec::from_scaling(base);
    let t = cfg.t;
    let reference = replicate(seed, domain::FELLER_EXACT, cfg.reps, |_, rng| {
        feller_exact_sample(&spec, t, rng)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let mut report = ExperimentReport::new("converge_x", json!(cfg), seed);
    let exact_mean = spec.mean(t);
    let m = sample_moments(&reference)?;
    report.push(Comparison::z("feller_mean", m.mean, exact_mean, m.se_mean, 5.0).sized(cfg.reps, 0));

    let linear = base.offspring.support() == [1];
    let mut ks_seq = Vec::new();
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let s = base.with_n(n)?;
        let z0 = s.initial_count();
        let model = s.tree_model(2.0 * t)?;
        let draw = |rng: &mut crate::RngStream| -> Result<f64> {
            let z = if linear {
                linear_birth_death_sample(s.lambda_n, s.mu_n, z0, t, rng)?
            } else {
                gillespie_endpoints(&model, z0, &[t], rng, DEFAULT_EVENT_CAP)?[0]
            };
            Ok(z as f64 / s.n())
        };
        let side = replicate(seed, domain::X_SCALED + i as u16, cfg.reps, |_, rng| draw(rng));
        let (side, dropped) = drop_capped(side)?;
        report.value(format!("dropped_n={n}"), dropped as f64);
        let ks = ks_two_sample_values(&side, &reference)?;
        ks_seq.push(ks.d);
        let last = i + 1 == cfg.n_list.len();
        let mut c = Comparison::new(format!("ks_n={n}"), ComparisonKind::Ks, ks.d, cfg.final_ks)
            .at_n(n)
            .at_t(t)
            .sized(side.len(), reference.len());
        if !last {
            c = c.informational();
        }
        report.push(c);
        let m = sample_moments(&side)?;
        report.push(
            Comparison::z(format!("mean_n={n}"), m.mean, s.initial_mass() * (s.drift() * t).exp(), m.se_mean, 5.0)
                .at_n(n)
                .at_t(t)
                .sized(side.len(), 0),
        );
        if linear && n <= cfg.gillespie_check_up_to {
            let chain = replicate(seed, domain::X_GILLESPIE + i as u16, cfg.reps, |_, rng| {
                Ok(gillespie_endpoints(&model, z0, &[t], rng, DEFAULT_EVENT_CAP)?[0] as f64 / s.n())
            });
            let (chain, _) = drop_capped(chain)?;
            let ks = ks_two_sample_values(&side, &chain)?;
            report.push(
                Comparison::new(
                    format!("exact_vs_gillespie_n={n}"),
                    ComparisonKind::Ks,
                    ks.d,
                    ks_critical_value(side.len(), Some(chain.len()), KS_ALPHA),
                )
                .at_n(n)
                .sized(side.len(), chain.len()),
            );
        }
    }
    let rise = ks_seq.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    if ks_seq.len() > 1 {
        report.push(Comparison::new("ks_trend", ComparisonKind::Trend, rise, cfg.trend_slack));
    }
    if linear {
        report.note("linear birth-death: Z_t drawn from its exact transition law");
    }
    Ok(report)
}

/// Exact Feller draws against the full-truncation Euler oracle at step `dt`.
pub fn feller_oracle_experiment(
    spec: &FellerSpec,
    t: f64,
    dt: f64,
    reps: usize,
    threshold: f64,
    seed: u64,
) -> Result<ExperimentReport> {
    let exact = replicate(seed, domain::FELLER_EXACT, reps, |_, rng| feller_exact_sample(spec, t, rng))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let euler = replicate(seed, domain::FELLER_EULER, reps, |_, rng| feller_euler_endpoint(spec, t, dt, rng))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut report = ExperimentReport::new(
        "feller_oracle",
        json!({ "spec": spec, "t": t, "dt": dt, "reps": reps }),
        seed,
    );
    let ks = ks_two_sample_values(&exact, &euler)?;
    report.push(
        Comparison::new("ks_exact_vs_euler", ComparisonKind::Ks, ks.d, threshold)
            .at_t(t)
            .sized(reps, reps),
    );
    for (name, xs) in [("exact", &exact), ("euler", &euler)] {
        let m = sample_moments(xs)?;
        let mut mean = Comparison::z(format!("{name}_mean"), m.mean, spec.mean(t), m.se_mean, 5.0).sized(reps, 0);
        let mut var =
            Comparison::z(format!("{name}_variance"), m.variance, spec.variance(t), m.se_variance, 5.0).sized(reps, 0);
        if name == "euler" {
            // the oracle carries an O(dt) bias; reported only
            mean = mean.informational();
            var = var.informational();
        }
        report.push(mean);
        report.push(var);
    }
    report.value("atom_exact", exact.iter().filter(|&&x| x == 0.0).count() as f64 / reps as f64);
    report.value("atom_euler", euler.iter().filter(|&&x| x == 0.0).count() as f64 / reps as f64);
    Ok(report)
}

/// Genealogy rates behind the exploration path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightMode {
    /// `(lambda_N, mu_N)` per unit height.
    TreeClock,
    /// Switch intensities of the rescaled height SDE divided by the slope.
    PaperSde,
}

impl HeightMode {
    pub fn name(self) -> &'static str {
        match self {
            HeightMode::TreeClock => "tree-clock",
            HeightMode::PaperSde => "paper-sde",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HConvergenceConfig {
    pub base: ScalingParams,
    pub n_list: Vec<u32>,
    pub s: f64,
    #[serde(with = "crate::stochastic::horizon_serde")]
    pub gamma: f64,
    pub reps: usize,
    pub modes: Vec<HeightMode>,
    /// Step of the reference reflected Brownian motion.
    pub ds: f64,
    pub final_ks: f64,
    /// When false every row is informational.
    pub gating: bool,
}

/// Marginal `H_s` of the endless-forest exploration at slope `2N` against
/// the reflected Brownian motion reference, per `N` and clock mode. Only the
/// paper-SDE mode at the last `N` gates.
pub fn h_convergence_experiment(cfg: &HConvergenceConfig, seed: u64) -> Result<ExperimentReport> {
    if cfg.n_list.is_empty() || cfg.modes.is_empty() {
        return Err(Error::param("n_list", "need at least one N and one mode"));
    }
    let spec = ReflectedBmSpec::from_scaling(&cfg.base, cfg.gamma)?;
    let s = cfg.s;
    let reference = replicate(seed, domain::RBM, cfg.reps, |_, rng| reflected_bm_sample(&spec, s, cfg.ds, rng))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut report = ExperimentReport::new("converge_h", json!(cfg), seed);
    report.value("reference_mean", reference.iter().sum::<f64>() / reference.len() as f64);

    for (i, &n) in cfg.n_list.iter().enumerate() {
        let sc = cfg.base.with_n(n)?;
        let tree = sc.tree_model(cfg.gamma)?;
        let sde = sc.paper_sde_model(cfg.gamma)?;
        report.value(
            format!("time_change_ratio_n={n}"),
            (sde.lambda + sde.mu) / (tree.lambda + tree.mu),
        );
        let same = rel_close(sde.lambda, tree.lambda) && rel_close(sde.mu, tree.mu);
        let mut tree_samples: Option<Vec<f64>> = None;
        for &mode in &cfg.modes {
            let model = match mode {
                HeightMode::TreeClock => &tree,
                HeightMode::PaperSde => &sde,
            };
            let reuse = mode == HeightMode::PaperSde && same && tree_samples.is_some();
            let samples = if reuse {
                tree_samples.clone().unwrap()
            } else {
                let dom = domain::H_SCALED + 2 * i as u16 + (mode == HeightMode::PaperSde) as u16;
                let raw = replicate(seed, dom, cfg.reps, |_, rng| {
                    height_at(model, sc.slope, s, rng, usize::MAX)
                });
                raw.into_iter().collect::<Result<Vec<f64>>>()?
            };
            if mode == HeightMode::TreeClock {
                tree_samples = Some(samples.clone());
            }
            if reuse {
                report.note(format!("n={n}: paper-sde rates equal tree-clock rates, samples shared"));
            }
            let ks = ks_two_sample_values(&samples, &reference)?;
            let last = i + 1 == cfg.n_list.len();
            let mut c = Comparison::new(format!("ks_n={n}_{}", mode.name()), ComparisonKind::Ks, ks.d, cfg.final_ks)
                .at_n(n)
                .at_t(s)
                .in_mode(mode.name())
                .sized(samples.len(), reference.len());
            if !(cfg.gating && last && mode == HeightMode::PaperSde) {
                c = c.informational();
            }
            report.push(c);
            report.value(
                format!("mean_n={n}_{}", mode.name()),
                samples.iter().sum::<f64>() / samples.len() as f64,
            );
        }
    }
    Ok(report)
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}
