//! The acceptance suite with its parameters pinned. Only the seed is taken
//! from the run configuration.

use std::io::Write;
use std::time::Instant;

use anyhow::Result;
use branch_contour::limits::{
    bijection_experiment, correspondence_experiment, feller_oracle_experiment, h_convergence_experiment,
    moment_experiment, occupation_experiment, poisson_props_experiment, rayknight_experiment,
    x_convergence_experiment, Comparison, HConvergenceConfig, HeightMode, XConvergenceConfig,
};
use branch_contour::{ExperimentReport, FellerSpec, ModelParams, OffspringLaw, ScalingParams};
use serde::Serialize;

use crate::commands::Verdict;
use crate::output::Artifacts;

#[derive(Serialize)]
struct Entry {
    criteria: Vec<u8>,
    report: ExperimentReport,
}

#[derive(Serialize)]
struct Timing {
    experiment: String,
    criteria: Vec<u8>,
    seconds: f64,
}

fn two_point() -> OffspringLaw {
    OffspringLaw::from_pmf([(1, 0.5), (3, 0.5)]).expect("valid pmf")
}

/// Criterion a comparison row belongs to.
fn criterion_of(entry: &Entry, c: &Comparison) -> u8 {
    if entry.criteria.len() > 1 && c.label.starts_with("second_moment") {
        entry.criteria[1]
    } else {
        entry.criteria[0]
    }
}

pub fn run(seed: u64, out: &Artifacts) -> Result<Verdict> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut timings: Vec<Timing> = Vec::new();
    let mut run = |criteria: &[u8], f: &dyn Fn() -> branch_contour::Result<ExperimentReport>| -> Result<()> {
        let start = Instant::now();
        let report = f()?;
        let seconds = start.elapsed().as_secs_f64();
        eprintln!("selftest: {} done in {seconds:.1} s", report.experiment);
        timings.push(Timing {
            experiment: report.experiment.clone(),
            criteria: criteria.to_vec(),
            seconds,
        });
        entries.push(Entry {
            criteria: criteria.to_vec(),
            report,
        });
        Ok(())
    };

    // exact first and second moments
    for (k, (alpha, beta)) in [(0.5, 1.0), (1.0, 1.0), (1.0, 0.5)].into_iter().enumerate() {
        let s = ScalingParams::new(50, 1.0, 1.0, alpha, beta, two_point())?;
        run(&[1, 2], &|| moment_experiment(&s, &[0.5, 1.0], 10_000, seed.wrapping_add(k as u64)))?;
    }

    // local time against population
    for n in [5, 20] {
        let s = ScalingParams::new(n, 1.0, 1.0, 0.5, 1.0, two_point())?;
        run(&[3], &|| rayknight_experiment(&s, 2.0, &[0.5, 1.0, 1.5], 5_000, seed.wrapping_add(n as u64)))?;
    }

    // tree -> contour -> tree across regimes
    let models = [0.5, 1.0, 1.5]
        .iter()
        .map(|&lambda| ModelParams::new(two_point(), lambda, 2.0, 1.0))
        .collect::<branch_contour::Result<Vec<_>>>()?;
    run(&[4], &|| bijection_experiment(&models, 3_334, seed))?;

    // direct exploration against the contour of a simulated tree
    let corr = ModelParams::new(two_point(), 0.6, 1.0, 3.0)?;
    run(&[5], &|| correspondence_experiment(&corr, 10_000, seed))?;

    run(&[6], &|| occupation_experiment(1_000, 5, seed))?;

    // exact Feller sampler against the Euler oracle, then X^N against it
    let feller = FellerSpec::new(1.0, -0.5, 1.0)?;
    run(&[7], &|| feller_oracle_experiment(&feller, 1.0, 1e-4, 10_000, 0.02, seed))?;
    let xc = XConvergenceConfig {
        base: ScalingParams::new(10, 1.0, 1.0, 0.0, 0.0, OffspringLaw::binary())?,
        n_list: vec![10, 100, 1000],
        t: 1.0,
        reps: 10_000,
        final_ks: 0.05,
        trend_slack: 0.01,
        gillespie_check_up_to: 100,
    };
    run(&[7], &|| x_convergence_experiment(&xc, seed))?;

    // height process against reflected Brownian motion; the two-point law
    // is reported without gating
    let hc = HConvergenceConfig {
        base: ScalingParams::new(100, 1.0, 1.0, 0.5, 1.0, OffspringLaw::binary())?,
        n_list: vec![100, 500],
        s: 1.0,
        gamma: 2.0,
        reps: 10_000,
        modes: vec![HeightMode::TreeClock, HeightMode::PaperSde],
        ds: 1e-4,
        final_ks: 0.05,
        gating: true,
    };
    run(&[8], &|| h_convergence_experiment(&hc, seed))?;
    let hc_info = HConvergenceConfig {
        base: ScalingParams::new(100, 1.0, 1.0, 0.5, 1.0, two_point())?,
        reps: 2_000,
        gating: false,
        ..hc.clone()
    };
    run(&[8], &|| h_convergence_experiment(&hc_info, seed.wrapping_add(1)))?;

    run(&[9], &|| poisson_props_experiment(10_000, seed))?;

    out.json("report.json", "reports", &entries)?;
    out.json("timings.json", "timings", &timings)?;

    let mut rows = String::from("criterion,");
    rows.push_str(ExperimentReport::CSV_HEADER);
    rows.push('\n');
    for e in &entries {
        let mut buf = Vec::new();
        e.report.write_csv_rows(&mut buf)?;
        for (c, line) in e.report.comparisons.iter().zip(String::from_utf8(buf)?.lines()) {
            rows.push_str(&format!("{},{line}\n", criterion_of(e, c)));
        }
    }
    out.stamped("summary.csv", |w| w.write_all(rows.as_bytes()))?;

    println!("{:<10} {:>6} {:>6} {:>9}  result", "criterion", "rows", "gating", "seconds");
    let mut failed = Vec::new();
    for k in 1..=9u8 {
        let mut total = 0;
        let mut gating = 0;
        let mut ok = true;
        for e in &entries {
            for c in e.report.comparisons.iter().filter(|c| criterion_of(e, c) == k) {
                total += 1;
                if c.gating {
                    gating += 1;
                    ok &= c.pass;
                }
            }
        }
        let seconds: f64 = timings.iter().filter(|t| t.criteria.contains(&k)).map(|t| t.seconds).sum();
        println!(
            "{k:<10} {total:>6} {gating:>6} {seconds:>9.1}  {}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(k);
        }
    }
    println!("{:<10} compare report.json across thread counts", 10);
    Ok(if failed.is_empty() {
        Verdict {
            pass: true,
            message: "selftest: criteria 1-9 pass".into(),
        }
    } else {
        Verdict {
            pass: false,
            message: format!("selftest: failed criteria {failed:?}"),
        }
    })
}
