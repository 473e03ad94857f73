//! Comparison primitives: Kolmogorov-Smirnov, chi-square goodness of fit and
//! moments with standard errors.

mod chi2;
mod ks;
mod moments;
mod pool;

pub use chi2::{chi2_gof, Chi2Result};
pub use ks::{
    kolmogorov_q, ks_critical_value, ks_one_sample, ks_two_sample, ks_two_sample_values, KsResult,
    KS_ALPHA,
};
pub use moments::{moments_with_se, sample_moments, Moments};
pub use pool::{PoolMetadata, SamplePool};
