use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::domain;
use super::{drop_capped, Comparison, ComparisonKind, ExperimentReport};
use crate::branching::{
    gillespie_endpoints, scaled_mean, second_moment_population, simulate_tree, TreeCaps,
    DEFAULT_EVENT_CAP,
};
use crate::error::{Error, Result};
use crate::exploration::{
    contour_of_tree, explore_direct, occupation_check, tree_of_contour, ClockConvention,
    HeightPath, LevelFunction, MinimumTag, DEFAULT_EXTREMA_CAP,
};
use crate::parallel::{replicate, replicate_range};
use crate::stats::{
    chi2_gof, ks_critical_value, ks_one_sample, ks_two_sample_values, sample_moments, KS_ALPHA,
};
use crate::stochastic::{
    last_point_before, poisson_points, splice, Criticality, ModelParams, OffspringLaw, PointSet, RngStream,
    ScalingParams,
};

/// Mean and second moment of `X_t^{N,x}` against their closed forms.
pub fn moment_experiment(
    scaling: &ScalingParams,
    times: &[f64],
    reps: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let model = scaling.tree_model(2.0 * t_max + 1.0)?;
    let z0 = scaling.initial_count();
    let n = scaling.n();
    let draws = replicate(seed, domain::MOMENTS, reps, |_, rng| {
        gillespie_endpoints(&model, z0, times, rng, DEFAULT_EVENT_CAP)
    });
    let (draws, dropped) = drop_capped(draws)?;
    let mut report = ExperimentReport::new(
        "moments",
        json!({ "scaling": scaling, "times": times, "reps": reps }),
        seed,
    );
    report.value("dropped", dropped as f64);
    for (j, &t) in times.iter().enumerate() {
        let x: Vec<f64> = draws.iter().map(|z| z[j] as f64 / n).collect();
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let m1 = sample_moments(&x)?;
        let m2 = sample_moments(&x2)?;
        let tag = format!("a={},b={},t={t}", scaling.alpha, scaling.beta);
        report.value(format!("mean_{tag}"), m1.mean);
        report.value(format!("se_mean_{tag}"), m1.se_mean);
        report.value(format!("second_moment_{tag}"), m2.mean);
        report.value(format!("se_second_moment_{tag}"), m2.se_mean);
        report.push(
            Comparison::z(format!("mean_{tag}"), m1.mean, scaled_mean(t, scaling), m1.se_mean, 5.0)
                .at_n(scaling.n_scale)
                .at_t(t)
                .sized(x.len(), 0),
        );
        report.push(
            Comparison::z(
                format!("second_moment_{tag}"),
                m2.mean,
                second_moment_population(t, scaling),
                m2.se_mean,
                5.0,
            )
            .at_n(scaling.n_scale)
            .at_t(t)
            .sized(x.len(), 0),
        );
    }
    Ok(report)
}

/// Round trip `tree -> contour -> tree` on random trees for each model;
/// counts trees not recovered exactly after canonical relabelling.
pub fn bijection_experiment(models: &[ModelParams], trees: usize, seed: u64) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "bijection",
        json!({ "models": models, "trees_per_model": trees }),
        seed,
    );
    let mut total = 0;
    for (k, model) in models.iter().enumerate() {
        let outcomes = replicate(seed, domain::BIJECTION, trees, |i, _| {
            // one stream per (model, tree)
            let mut rng = RngStream::substream(seed, domain::BIJECTION, (k * trees + i) as u64);
            let tree = simulate_tree(model, &mut rng, TreeCaps::default())?;
            let path = contour_of_tree(&tree, 1.0)?;
            Ok((tree_of_contour(&path)? != tree.canonicalize()) as usize)
        });
        let (outcomes, dropped) = drop_capped(outcomes)?;
        let fails: usize = outcomes.iter().sum();
        total += outcomes.len();
        report.value(format!("dropped_{}", k), dropped as f64);
        report.push(
            Comparison::new(
                format!("mismatches_{}", criticality_name(model)),
                ComparisonKind::Exact,
                fails as f64,
                0.0,
            )
            .sized(outcomes.len(), outcomes.len()),
        );
    }
    report.value("trees", total as f64);
    Ok(report)
}

/// Law of the directly sampled path against the contour of a simulated
/// tree, on three summaries: number of maxima, maximum, total variation.
pub fn correspondence_experiment(model: &ModelParams, reps: usize, seed: u64) -> Result<ExperimentReport> {
    let summary = |p: &HeightPath| [p.num_maxima() as f64, p.max_height(), p.total_variation()];
    let direct = replicate(seed, domain::CORR_DIRECT, reps, |_, rng| {
        explore_direct(model, 1, rng, DEFAULT_EXTREMA_CAP).map(|p| summary(&p))
    });
    let via_tree = replicate(seed, domain::CORR_TREE, reps, |_, rng| {
        let tree = simulate_tree(model, rng, TreeCaps::default())?;
        contour_of_tree(&tree, 1.0).map(|p| summary(&p))
    });
    let (direct, da) = drop_capped(direct)?;
    let (via_tree, db) = drop_capped(via_tree)?;
    let mut report = ExperimentReport::new("correspondence", json!({ "model": model, "reps": reps }), seed);
    report.value("dropped_direct", da as f64);
    report.value("dropped_tree", db as f64);
    let crit = ks_critical_value(direct.len(), Some(via_tree.len()), KS_ALPHA);
    for (j, name) in ["num_maxima", "max_height", "total_variation"].iter().enumerate() {
        let a: Vec<f64> = direct.iter().map(|s| s[j]).collect();
        let b: Vec<f64> = via_tree.iter().map(|s| s[j]).collect();
        let ks = ks_two_sample_values(&a, &b)?;
        report.push(Comparison::new(format!("ks_{name}"), ComparisonKind::Ks, ks.d, crit).sized(a.len(), b.len()));
    }
    Ok(report)
}

/// Occupation-times identity on random paths and random step functions;
/// the statistic is the largest `|lhs - rhs| / (1 + |lhs|)`.
pub fn occupation_experiment(paths: usize, functions: usize, seed: u64) -> Result<ExperimentReport> {
    let law = OffspringLaw::from_pmf([(1, 0.5), (2, 0.3), (4, 0.2)])?;
    let model = ModelParams::new(law, 0.8, 1.6, 3.0)?;
    let errs = replicate(seed, domain::OCCUPATION, paths, |i, rng| -> Result<f64> {
        let slope = 0.5 + 3.5 * rng.uniform();
        let trees = 1 + (rng.uniform() * 4.0) as usize;
        let path = explore_direct(&model, trees, rng, DEFAULT_EXTREMA_CAP)?
            .with_clock(ClockConvention::TreeClock { slope });
        let total = path.total_variation() / slope;
        // every other path is cut part way through
        let horizon = if i % 2 == 0 { f64::INFINITY } else { total * rng.uniform() };
        let mut worst: f64 = 0.0;
        for _ in 0..functions {
            let pieces = 1 + (rng.uniform() * 4.0) as usize;
            let mut breaks: Vec<f64> = (0..=pieces).map(|_| 3.2 * rng.uniform()).collect();
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            if breaks.len() < 2 {
                continue;
            }
            let values = (1..breaks.len()).map(|_| 4.0 * rng.uniform() - 2.0).collect();
            let g = LevelFunction::new(breaks, values)?;
            let (lhs, rhs) = occupation_check(&path, &g, horizon)?;
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
        Ok(worst)
    });
    let (errs, dropped) = drop_capped(errs)?;
    let mut report = ExperimentReport::new(
        "occupation",
        json!({ "model": model, "paths": paths, "functions": functions }),
        seed,
    );
    report.value("dropped", dropped as f64);
    report.push(
        Comparison::new(
            "max_relative_error",
            ComparisonKind::RelativeError,
            errs.iter().copied().fold(0.0, f64::max),
            1e-9,
        )
        .sized(errs.len(), functions),
    );
    Ok(report)
}

/// A stretch of exploration time with constant event intensity, possibly
/// ending with an event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventPiece {
    pub duration: f64,
    pub intensity: f64,
    pub event_at_end: bool,
}

/// Event times of a point process together with its piecewise-constant
/// intensity; stretches where the intensity vanishes are left out.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub pieces: Vec<EventPiece>,
}

impl EventStream {
    /// Homogeneous Poisson process of `rate` observed through `points`.
    pub fn homogeneous(points: &PointSet, rate: f64) -> Self {
        Self {
            pieces: points
                .gaps()
                .map(|g| EventPiece { duration: g, intensity: rate, event_at_end: true })
                .collect(),
        }
    }

    pub fn event_count(&self) -> usize {
        self.pieces.iter().filter(|p| p.event_at_end).count()
    }

    /// `int_{S_{k-1}}^{S_k} lambda(r) dr` for each event; the tail after the
    /// last event is censored and dropped.
    pub fn compensator_increments(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.event_count());
        let mut acc = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            if !(p.intensity > 0.0 && p.intensity.is_finite()) || !(p.duration >= 0.0) {
                return Err(Error::Statistics(format!("piece {i}: intensity must be positive and finite")));
            }
            acc += p.duration * p.intensity;
            if p.event_at_end {
                out.push(acc);
                acc = 0.0;
            }
        }
        Ok(out)
    }
}

/// New-birth-event stream of an exploration path in exploration time:
/// events happen only while descending, at `birth_intensity` per unit `s`;
/// descents that end on a pending level or at 0 are censored.
pub fn birth_event_stream(path: &HeightPath, birth_intensity: f64) -> EventStream {
    let slope = path.clock.slope();
    let mut pieces = Vec::new();
    for exc in &path.excursions {
        for ((big, small), tag) in exc.extrema().zip(&exc.tags) {
            pieces.push(EventPiece {
                duration: (big - small) / slope,
                intensity: birth_intensity,
                event_at_end: matches!(tag, MinimumTag::NewBirthEvent { .. }),
            });
        }
    }
    EventStream { pieces }
}

/// Time-changed inter-event gaps against Exp(1).
pub fn time_change_exponential_check(label: &str, stream: &EventStream) -> Result<Comparison> {
    let inc = stream.compensator_increments()?;
    if inc.is_empty() {
        return Ok(Comparison::new(format!("{label}_empty"), ComparisonKind::Ks, 0.0, 1.0).sized(0, 0));
    }
    let ks = ks_one_sample(&inc, |x| 1.0 - (-x).exp())?;
    Ok(Comparison::new(label, ComparisonKind::Ks, ks.d, ks_critical_value(inc.len(), None, KS_ALPHA))
        .sized(inc.len(), 0))
}

/// Poisson-process facts used by the exploration: last point before an
/// independent time, the splice, the exponential time change of the
/// homogeneous process and of the explorer's birth events in paper-SDE mode,
/// and the batch-size law.
pub fn poisson_props_experiment(reps: usize, seed: u64) -> Result<ExperimentReport> {
    let lambda = 1.0;
    let mut report = ExperimentReport::new("poisson_props", json!({ "reps": reps, "lambda": lambda }), seed);

    // last point before M = 1 against min(Exp(lambda), M)
    let m = 1.0;
    let a = replicate(seed, domain::LAST_POINT, reps, |_, rng| -> Result<f64> {
        let pts = poisson_points(lambda, m, rng)?;
        Ok(m - last_point_before(&pts, m)?.0)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let b: Vec<f64> = replicate(seed, domain::TRUNCATED_EXP, reps, |_, rng| rng.exp(lambda).min(m));
    let ks = ks_two_sample_values(&a, &b)?;
    report.push(
        Comparison::new(
            "last_point_gap",
            ComparisonKind::Ks,
            ks.d,
            ks_critical_value(reps, Some(reps), KS_ALPHA),
        )
        .sized(reps, reps),
    );

    // splice at an independent M ~ Exp(1): first two gaps and their
    // correlation with R_M
    let spliced = replicate(seed, domain::SPLICE, reps, |_, rng| -> Result<[f64; 3]> {
        let m = rng.exp(1.0);
        let horizon = m + 40.0 / lambda;
        let pts = poisson_points(lambda, horizon, rng)?;
        let fresh = poisson_points(lambda, 40.0 / lambda, rng)?;
        let (r, _) = last_point_before(&pts, m)?;
        let sp = splice(&pts, m, &fresh)?;
        let (Some(t1), Some(t2)) = (sp.get(1), sp.get(2)) else {
            return Err(Error::InvalidPoints("spliced set shorter than two points".into()));
        };
        Ok([r, t1, t2 - t1])
    })
    .into_iter()
    .collect::<Result<Vec<[f64; 3]>>>()?;
    let crit1 = ks_critical_value(reps, None, KS_ALPHA);
    let rho_max = 4.0 / (reps as f64).sqrt();
    for (j, name) in [(1, "splice_gap1"), (2, "splice_gap2")] {
        let g: Vec<f64> = spliced.iter().map(|v| v[j]).collect();
        let ks = ks_one_sample(&g, |x| 1.0 - (-lambda * x).exp())?;
        report.push(Comparison::new(name, ComparisonKind::Ks, ks.d, crit1).sized(reps, 0));
        let r: Vec<f64> = spliced.iter().map(|v| v[0]).collect();
        report.push(
            Comparison::new(format!("{name}_corr_r"), ComparisonKind::Correlation, correlation(&r, &g).abs(), rho_max)
                .sized(reps, reps),
        );
    }

    // homogeneous stream
    let stream = replicate(seed, domain::POISSON_STREAM, 1, |_, rng| poisson_points(2.5, reps as f64 / 2.5 * 1.05, rng))
        .pop()
        .unwrap()?;
    let mut stream = EventStream::homogeneous(&stream, 2.5);
    stream.pieces.truncate(reps);
    report.push(time_change_exponential_check("time_change_homogeneous", &stream)?);

    // explorer birth events under the paper-SDE clock
    let law = OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)])?;
    let scaling = ScalingParams::new(20, 1.0, 1.0, 0.5, 1.0, law.clone())?;
    let model = scaling.paper_sde_model(2.0)?;
    let clock = ClockConvention::paper_sde(&scaling);
    let intensity = scaling.paper_sde_intensities().0;
    let mut pieces = Vec::new();
    let mut events = 0;
    let mut next = 0;
    while events < reps {
        let chunk = replicate_range(seed, domain::EXPLORER_STREAM, next..next + 64, |_, rng| {
            let path = explore_direct(&model, scaling.initial_count() as usize, rng, DEFAULT_EXTREMA_CAP)?
                .with_clock(clock.clone());
            Ok(birth_event_stream(&path, intensity))
        })
        .into_iter()
        .collect::<Result<Vec<EventStream>>>()?;
        for s in chunk {
            // the censored tail of each forest is cut at its last event
            let keep = s.pieces.iter().rposition(|p| p.event_at_end).map_or(0, |k| k + 1);
            events += s.event_count();
            pieces.extend_from_slice(&s.pieces[..keep]);
        }
        next += 64;
    }
    let mut stream = EventStream { pieces };
    let mut seen = 0;
    let cut = stream
        .pieces
        .iter()
        .position(|p| {
            seen += p.event_at_end as usize;
            seen == reps
        })
        .unwrap();
    stream.pieces.truncate(cut + 1);
    report.push(time_change_exponential_check("time_change_explorer_paper_sde", &stream)?);

    // batch sizes
    let theta = replicate(seed, domain::THETA, reps, |_, rng| law.sample(rng));
    let mut counts = BTreeMap::new();
    for t in theta {
        *counts.entry(t).or_insert(0u64) += 1;
    }
    let chi = chi2_gof(&counts, &law)?;
    let crit = if chi.df == 0 {
        0.0
    } else {
        ChiSquared::new(chi.df as f64)
            .map_err(|e| Error::Statistics(e.to_string()))?
            .inverse_cdf(1.0 - KS_ALPHA)
    };
    report.push(Comparison::new("batch_sizes", ComparisonKind::ChiSquare, chi.stat, crit).sized(reps, 0));
    Ok(report)
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn criticality_name(model: &ModelParams) -> &'static str {
    match model.criticality() {
        Criticality::Subcritical => "subcritical",
        Criticality::Critical => "critical",
        Criticality::Supercritical => "supercritical",
    }
}
