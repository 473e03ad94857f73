#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use branch_contour::limits::HeightMode;
use branch_contour::stochastic::horizon_serde;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::RunConfig;
use output::Artifacts;

/// Invalid configuration; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Branching forests with multiple births, their exploration paths and the
/// statistical checks tying them to their diffusion limits.
///
/// Every output file carries the config digest and the seed. Results do not
/// depend on --threads.
#[derive(Parser)]
#[command(name = "branch-contour", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON config; keys not given keep their defaults (see --print-config).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Replicates per sample family.
    #[arg(long, global = true, value_name = "N")]
    reps: Option<usize>,
    /// Worker threads; has no effect on results.
    #[arg(long, global = true, value_name = "N", env = "BRANCH_CONTOUR_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Killing level, a positive number or `inf`.
    #[arg(long, global = true, value_name = "FLOAT|inf", value_parser = horizon_serde::parse)]
    gamma: Option<f64>,
    /// Scaling parameter N of the rescaled family.
    #[arg(long = "N", global = true, value_name = "N")]
    n: Option<u32>,
    /// Number of roots for the tree-level subcommands.
    #[arg(long, global = true)]
    trees: Option<usize>,
    /// Print the effective config as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    TreeClock,
    PaperSde,
}

impl From<ModeArg> for HeightMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::TreeClock => HeightMode::TreeClock,
            ModeArg::PaperSde => HeightMode::PaperSde,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a forest from the `model` block.
    ///
    /// Writes forest.jsonl: a header line {gamma, roots}, then one
    /// individual per line {id, parent, birth, death, killed, events}.
    Tree,
    /// Contour of a forest, then back to a forest, checking the roundtrip.
    ///
    /// Writes contour_extrema.csv (index,kind,level,tag),
    /// contour_vertices.csv (s,h) and roundtrip.json.
    Contour {
        /// Forest JSON-lines to read instead of simulating one.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Sample an exploration path directly.
    ///
    /// Without --mode the `model` block is used at slope `slope`; with
    /// --mode the `scaling` block and its clock. Writes
    /// explore_extrema.csv (index,kind,level,tag) and explore_vertices.csv
    /// (s,h).
    Explore,
    /// Gillespie population of the rescaled family with a moment table.
    ///
    /// Writes population_table.csv
    /// (t,mean,se_mean,z_mean,second_moment,se_second_moment,z_second_moment),
    /// population_path.csv (t,z) for one rescaled path, and
    /// population.{json,csv}.
    Population,
    /// Local time of the explored forest against the population, per level.
    ///
    /// Writes rayknight_levels.csv (t,ks,critical,pass) and
    /// rayknight.{json,csv}.
    Rayknight,
    /// Rescaled population against exact Feller draws over `n_list`.
    ///
    /// Writes converge_x.{json,csv}. Report CSV columns:
    /// experiment,label,kind,n,t,mode,statistic,threshold,gating,pass.
    ConvergeX,
    /// Height process marginal against reflected Brownian motion.
    ///
    /// Runs both clocks unless --mode is given; gates only for a binary
    /// law. Writes converge_h.{json,csv} with the report CSV columns.
    ConvergeH,
    /// Poisson point properties and time-changed birth events.
    ///
    /// Writes poisson_props.{json,csv} with the report CSV columns.
    PoissonProps,
    /// Full acceptance suite with pinned parameters; uses only --seed.
    ///
    /// Writes report.json, summary.csv (criterion followed by the report
    /// CSV columns) and timings.json, and prints one line per criterion.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Tree => "tree",
            Command::Contour { .. } => "contour",
            Command::Explore => "explore",
            Command::Population => "population",
            Command::Rayknight => "rayknight",
            Command::ConvergeX => "converge-x",
            Command::ConvergeH => "converge-h",
            Command::PoissonProps => "poisson-props",
            Command::Selftest => "selftest",
        }
    }
}

fn effective_config(g: &Global) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text).map_err(ConfigError)?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.reps {
        cfg.reps = Some(v);
    }
    if let Some(v) = g.threads {
        cfg.threads = Some(v);
    }
    if let Some(v) = &g.out {
        cfg.out = v.clone();
    }
    if let Some(v) = g.mode {
        cfg.mode = Some(v.into());
    }
    if let Some(v) = g.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = g.n {
        cfg.scaling.n = v;
    }
    if let Some(v) = g.trees {
        cfg.model.trees = v;
    }
    if cfg.threads == Some(0) {
        return Err(ConfigError("threads must be >= 1".into()));
    }
    if cfg.reps == Some(0) {
        return Err(ConfigError("reps must be >= 1".into()));
    }
    if !(cfg.gamma > 0.0) {
        return Err(ConfigError(format!("gamma must be > 0, got {}", cfg.gamma)));
    }
    Ok(cfg)
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match effective_config(&cli.global) {
        Ok(c) => c,
        Err(e) => return fail("config", e.0, 2),
    };
    if cli.global.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("runtime", e.to_string(), 1);
        }
    }
    let name = cli.command.name();
    let result = Artifacts::create(&cfg.out, cfg.digest(name), cfg.seed).and_then(|out| match &cli.command {
        Command::Tree => commands::tree(&cfg, &out),
        Command::Contour { input } => commands::contour(&cfg, &out, input.as_deref()),
        Command::Explore => commands::explore(&cfg, &out),
        Command::Population => commands::population(&cfg, &out),
        Command::Rayknight => commands::rayknight(&cfg, &out),
        Command::ConvergeX => commands::converge_x(&cfg, &out),
        Command::ConvergeH => commands::converge_h(&cfg, &out),
        Command::PoissonProps => commands::poisson_props(&cfg, &out),
        Command::Selftest => selftest::run(cfg.seed, &out),
    });
    match result {
        Ok(v) if v.pass => {
            println!("{}", v.message);
            ExitCode::SUCCESS
        }
        Ok(v) => fail("assertion", v.message, 1),
        Err(e) => {
            let config = e.downcast_ref::<ConfigError>().is_some()
                || matches!(
                    e.downcast_ref::<branch_contour::Error>(),
                    Some(branch_contour::Error::InvalidParameter { .. } | branch_contour::Error::InvalidLaw(_))
                );
            if config {
                fail("config", format!("{e:#}"), 2)
            } else {
                fail("runtime", format!("{e:#}"), 1)
            }
        }
    }
}
