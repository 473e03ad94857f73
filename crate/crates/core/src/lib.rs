//! Continuous-time Galton-Watson forests with batch births, their
//! piecewise-linear exploration (height) processes, crossing-count local
//! times, and reference simulators for the large-population limits.
//!
//! The crate is organised bottom-up:
//!
//! * [`stochastic`]: reproducible random streams, offspring laws, model and
//!   scaling parameters, Poisson point utilities.
//! * [`branching`]: trees, forests and population (mass) processes.
//! * [`exploration`]: the tree/contour bijection, the direct exploration
//!   sampler and local times.
//! * [`limits`]: Feller diffusion and reflected Brownian motion references,
//!   plus the convergence and identity-in-law experiments.
//! * [`stats`]: Kolmogorov-Smirnov, chi-square and moment utilities.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod error;
pub mod exploration;
pub mod limits;
pub mod parallel;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};

pub use branching::{
    gillespie_population, mean_population, population_path, rescale_path,
    second_moment_population, simulate_forest, simulate_tree, BirthEvent, Forest, Individual,
    PopulationPath, Tree, TreeCaps,
};
pub use exploration::{
    contour_of_tree, crossing_pairs, explore_direct, local_time, local_time_profile,
    occupation_check, parametrize, tree_of_contour, ClockConvention, Excursion, HeightPath,
    LevelFunction, LocalTimeValue, MinimumTag,
};
pub use limits::{ExperimentReport, FellerSpec, ReflectedBmSpec};
pub use stats::{ks_two_sample, moments_with_se, SamplePool};
pub use stochastic::{
    Criticality, ModelParams, OffspringLaw, PointSet, RngStream, ScalingParams,
};
