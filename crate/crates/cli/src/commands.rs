use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use branch_contour::branching::DEFAULT_EVENT_CAP;
use branch_contour::exploration::DEFAULT_EXTREMA_CAP;
use branch_contour::limits::{
    feller_oracle_experiment, h_convergence_experiment, moment_experiment, poisson_props_experiment,
    rayknight_experiment, x_convergence_experiment, HConvergenceConfig, HeightMode, XConvergenceConfig,
};
use branch_contour::{
    contour_of_tree, explore_direct, gillespie_population, rescale_path, simulate_forest, tree_of_contour,
    ClockConvention, ExperimentReport, FellerSpec, Forest, HeightPath, RngStream, TreeCaps,
};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::Artifacts;
use crate::ConfigError;

/// Stream domains of the single-draw subcommands, clear of the library's.
const TREE_DOMAIN: u16 = 1000;
const EXPLORE_DOMAIN: u16 = 1001;
const PATH_DOMAIN: u16 = 1002;

/// Outcome of a subcommand that ran to completion.
pub struct Verdict {
    pub pass: bool,
    pub message: String,
}

impl Verdict {
    fn of(pass: bool, message: impl Into<String>) -> Self {
        Self {
            pass,
            message: message.into(),
        }
    }

    fn of_reports(name: &str, reports: &[ExperimentReport]) -> Self {
        let failed: Vec<String> = reports
            .iter()
            .flat_map(|r| r.comparisons.iter().filter(|c| c.gating && !c.pass))
            .map(|c| format!("{} ({} > {})", c.label, c.statistic, c.threshold))
            .collect();
        if failed.is_empty() {
            Self::of(true, format!("{name}: all comparisons pass"))
        } else {
            Self::of(false, format!("{name}: failed {}", failed.join(", ")))
        }
    }
}

fn cfg_err(msg: String) -> anyhow::Error {
    ConfigError(msg).into()
}

pub fn tree(cfg: &RunConfig, out: &Artifacts) -> Result<Verdict> {
    let model = cfg.model_params().map_err(cfg_err)?;
    let mut rng = RngStream::substream(cfg.seed, TREE_DOMAIN, 0);
    let forest = simulate_forest(cfg.model.trees, &model, &mut rng, TreeCaps::default())?;
    let valid = forest.validate();
    let p = out.stamped("forest.jsonl", |w| forest.write_jsonl(w))?;
    println!(
        "forest: {} roots, {} individuals, {} alive at gamma -> {}",
        forest.roots.len(),
        forest.len(),
        forest.individuals.iter().filter(|i| i.killed_at_gamma).count(),
        p.display()
    );
    Ok(match valid {
        Ok(()) => Verdict::of(true, "tree: forest is consistent"),
        Err(e) => Verdict::of(false, format!("tree: {e}")),
    })
}

pub fn contour(cfg: &RunConfig, out: &Artifacts, input: Option<&Path>) -> Result<Verdict> {
    let slope = RunConfig::check_positive("slope", cfg.slope).map_err(cfg_err)?;
    let forest = match input {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Forest::read_jsonl(BufReader::new(f)).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?
        }
        None => {
            let model = cfg.model_params().map_err(cfg_err)?;
            let mut rng = RngStream::substream(cfg.seed, TREE_DOMAIN, 0);
            simulate_forest(cfg.model.trees, &model, &mut rng, TreeCaps::default())?
        }
    };
    let path = contour_of_tree(&forest, slope)?;
    let extrema = out.stamped("contour_extrema.csv", |w| path.write_extrema_csv(w))?;
    out.stamped("contour_vertices.csv", |w| path.write_vertex_csv(w))?;

    // path -> tree from the file just written, tagged and untagged
    let back = HeightPath::read_extrema_csv(BufReader::new(File::open(&extrema)?))?;
    let canonical = forest.canonicalize();
    let tagged_ok = tree_of_contour(&back)? == canonical;
    let mut untagged = back.clone();
    for e in &mut untagged.excursions {
        e.tags.clear();
    }
    let untagged_ok = tree_of_contour(&untagged)? == canonical;
    out.json(
        "roundtrip.json",
        "roundtrip",
        &json!({
            "individuals": forest.len(),
            "maxima": path.num_maxima(),
            "tagged_exact": tagged_ok,
            "untagged_exact": untagged_ok,
        }),
    )?;
    println!(
        "contour: {} individuals, {} maxima, roundtrip tagged={} untagged={}",
        forest.len(),
        path.num_maxima(),
        tagged_ok,
        untagged_ok
    );
    Ok(Verdict::of(tagged_ok && untagged_ok, "contour: tree -> path -> tree roundtrip"))
}

pub fn explore(cfg: &RunConfig, out: &Artifacts) -> Result<Verdict> {
    let (model, trees, clock) = match cfg.mode {
        None => {
            let slope = RunConfig::check_positive("slope", cfg.slope).map_err(cfg_err)?;
            (cfg.model_params().map_err(cfg_err)?, cfg.model.trees, ClockConvention::TreeClock { slope })
        }
        Some(mode) => {
            let s = cfg.scaling_params().map_err(cfg_err)?;
            let trees = s.initial_count() as usize;
            if trees == 0 {
                return Err(cfg_err("floor(N x) must be >= 1".into()));
            }
            match mode {
                HeightMode::TreeClock => (
                    s.tree_model(cfg.gamma).map_err(|e| cfg_err(e.to_string()))?,
                    trees,
                    ClockConvention::TreeClock { slope: s.slope },
                ),
                HeightMode::PaperSde => (
                    s.paper_sde_model(cfg.gamma).map_err(|e| cfg_err(e.to_string()))?,
                    trees,
                    ClockConvention::paper_sde(&s),
                ),
            }
        }
    };
    let mut rng = RngStream::substream(cfg.seed, EXPLORE_DOMAIN, 0);
    let path = explore_direct(&model, trees, &mut rng, DEFAULT_EXTREMA_CAP)?.with_clock(clock);
    let valid = path.validate();
    out.stamped("explore_extrema.csv", |w| path.write_extrema_csv(w))?;
    out.stamped("explore_vertices.csv", |w| path.write_vertex_csv(w))?;
    println!(
        "explore: {} excursions, {} maxima, max height {:.6}, total variation {:.6}",
        path.excursions.len(),
        path.num_maxima(),
        path.max_height(),
        path.total_variation()
    );
    Ok(match valid {
        Ok(()) => Verdict::of(true, "explore: path is consistent"),
        Err(e) => Verdict::of(false, format!("explore: {e}")),
    })
}

pub fn population(cfg: &RunConfig, out: &Artifacts) -> Result<Verdict> {
    let s = cfg.scaling_params().map_err(cfg_err)?;
    let times = &cfg.levels;
    if times.is_empty() || times.windows(2).any(|w| w[0] > w[1]) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(cfg_err("levels must be non-empty, sorted and >= 0".into()));
    }
    let reps = cfg.reps_or(10_000);
    let report = moment_experiment(&s, times, reps, cfg.seed).map_err(anyhow::Error::from)?;

    let model = s.tree_model(2.0 * times[times.len() - 1] + 1.0)?;
    let mut rng = RngStream::substream(cfg.seed, PATH_DOMAIN, 0);
    let path = rescale_path(&gillespie_population(&model, s.initial_count(), &mut rng, DEFAULT_EVENT_CAP)?, s.n_scale)?;
    out.stamped("population_path.csv", |w| path.write_csv(w))?;

    let tag = |t: f64| format!("a={},b={},t={t}", s.alpha, s.beta);
    let mut table = String::from("t,mean,se_mean,z_mean,second_moment,se_second_moment,z_second_moment\n");
    for &t in times {
        let k = tag(t);
        let v = |name: &str| report.values[&format!("{name}_{k}")];
        let z = |name: &str| report.find(&format!("{name}_{k}")).map_or(f64::NAN, |c| c.statistic);
        table.push_str(&format!(
            "{t},{},{},{},{},{},{}\n",
            v("mean"),
            v("se_mean"),
            z("mean"),
            v("second_moment"),
            v("se_second_moment"),
            z("second_moment")
        ));
    }
    out.stamped("population_table.csv", |w| w.write_all(table.as_bytes()))?;
    print!("{table}");
    let reports = [report];
    out.reports("population", &reports)?;
    Ok(Verdict::of_reports("population", &reports))
}

pub fn rayknight(cfg: &RunConfig, out: &Artifacts) -> Result<Verdict> {
    let s = cfg.scaling_params().map_err(cfg_err)?;
    if !cfg.gamma.is_finite() {
        return Err(cfg_err("rayknight needs a finite gamma".into()));
    }
    let levels = cfg.checked_levels().map_err(cfg_err)?;
    let report = rayknight_experiment(&s, cfg.gamma, &levels, cfg.reps_or(5_000), cfg.seed)?;
    let mut table = String::from("t,ks,critical,pass\n");
    for c in report.comparisons.iter().filter(|c| c.t.is_some()) {
        table.push_str(&format!("{},{},{},{}\n", c.t.unwrap(), c.statistic, c.threshold, c.pass));
    }
    out.stamped("rayknight_levels.csv", |w| w.write_all(table.as_bytes()))?;
    print!("{table}");
    let reports = [report];
    out.reports("rayknight", &reports)?;
    Ok(Verdict::of_reports("rayknight", &reports))
}

pub fn converge_x(cfg: &RunConfig, out: &Artifacts) -> Result<Verdict> {
    let base = cfg.scaling_params().map_err(cfg_err)?;
    let t = RunConfig::check_positive("t", cfg.t).map_err(cfg_err)?;
    let reps = cfg.reps_or(10_000);
    let xc = XConvergenceConfig {
        base: base.clone(),
        n_list: cfg.n_list.clone().unwrap_or_else(|| vec![10, 100, 1000]),
        t,
        reps,
        final_ks: cfg.final_ks,
        trend_slack: cfg.trend_slack,
        gillespie_check_up_to: 100,
    };
    let spec = FellerSpec::from_scaling(&base);
    let reports = [
        feller_oracle_experiment(&spec, t, 1e-4, reps, 0.02, cfg.seed)?,
        x_convergence_experiment(&xc, cfg.seed)?,
    ];
    print_rows(&reports);
    out.reports("converge_x", &reports)?;
    Ok(Verdict::of_reports("converge-x", &reports))
}

pub fn converge_h(cfg: &RunConfig, out: &Artifacts) -> Result<Verdict> {
    let base = cfg.scaling_params().map_err(cfg_err)?;
    let s = RunConfig::check_positive("s", cfg.s).map_err(cfg_err)?;
    let ds = RunConfig::check_positive("ds", cfg.ds).map_err(cfg_err)?;
    let hc = HConvergenceConfig {
        gating: base.offspring.support() == [1],
        base,
        n_list: cfg.n_list.clone().unwrap_or_else(|| vec![100, 500]),
        s,
        gamma: cfg.gamma,
        reps: cfg.reps_or(10_000),
        modes: cfg
            .mode
            .map_or_else(|| vec![HeightMode::TreeClock, HeightMode::PaperSde], |m| vec![m]),
        ds,
        final_ks: cfg.final_ks,
    };
    let reports = [h_convergence_experiment(&hc, cfg.seed)?];
    print_rows(&reports);
    out.reports("converge_h", &reports)?;
    Ok(Verdict::of_reports("converge-h", &reports))
}

pub fn poisson_props(cfg: &RunConfig, out: &Artifacts) -> Result<Verdict> {
    let reports = [poisson_props_experiment(cfg.reps_or(10_000), cfg.seed)?];
    print_rows(&reports);
    out.reports("poisson_props", &reports)?;
    Ok(Verdict::of_reports("poisson-props", &reports))
}

pub fn print_rows(reports: &[ExperimentReport]) {
    println!("{:<16} {:<40} {:>12} {:>12}  result", "experiment", "label", "statistic", "threshold");
    for r in reports {
        for c in &r.comparisons {
            let verdict = match (c.gating, c.pass) {
                (false, _) => "info",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            println!(
                "{:<16} {:<40} {:>12.6} {:>12.6}  {verdict}",
                r.experiment, c.label, c.statistic, c.threshold
            );
        }
    }
}
