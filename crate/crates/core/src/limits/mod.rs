//! Reference simulators for the large-population limits and the canned
//! experiments comparing them with the finite-`N` samplers.

mod experiments;
mod feller;
mod properties;
mod reflected;
mod report;

pub use experiments::{
    feller_oracle_experiment, h_convergence_experiment, rayknight_experiment,
    x_convergence_experiment, HConvergenceConfig, HeightMode, XConvergenceConfig,
};
pub use feller::{feller_euler_endpoint, feller_euler_path, feller_exact_sample, FellerSpec};
pub use properties::{
    bijection_experiment, birth_event_stream, correspondence_experiment, moment_experiment,
    occupation_experiment, poisson_props_experiment, time_change_exponential_check, EventPiece,
    EventStream,
};
pub use reflected::{reflected_bm_sample, ReflectedBmSpec};
pub use report::{Comparison, ComparisonKind, ExperimentReport};

/// Stream domains, one per independent sample family.
pub(crate) mod domain {
    pub const MOMENTS: u16 = 1;
    pub const RK_LOCAL_TIME: u16 = 2;
    pub const RK_POPULATION: u16 = 3;
    pub const RK_PATHWISE: u16 = 4;
    pub const BIJECTION: u16 = 5;
    pub const CORR_DIRECT: u16 = 6;
    pub const CORR_TREE: u16 = 7;
    pub const OCCUPATION: u16 = 8;
    pub const FELLER_EXACT: u16 = 9;
    pub const FELLER_EULER: u16 = 10;
    /// Plus the index of `N` in the list.
    pub const X_SCALED: u16 = 100;
    pub const X_GILLESPIE: u16 = 200;
    pub const RBM: u16 = 11;
    /// Plus `2 * index of N + mode`.
    pub const H_SCALED: u16 = 300;
    pub const LAST_POINT: u16 = 12;
    pub const TRUNCATED_EXP: u16 = 13;
    pub const SPLICE: u16 = 14;
    pub const POISSON_STREAM: u16 = 15;
    pub const EXPLORER_STREAM: u16 = 16;
    pub const THETA: u16 = 17;
}

/// Separates capped replicates from the rest; other errors propagate.
pub(crate) fn drop_capped<T>(results: Vec<crate::Result<T>>) -> crate::Result<(Vec<T>, usize)> {
    let mut kept = Vec::with_capacity(results.len());
    let mut dropped = 0;
    for r in results {
        match r {
            Ok(v) => kept.push(v),
            Err(crate::Error::CapExceeded { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((kept, dropped))
}
