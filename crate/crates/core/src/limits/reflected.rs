use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::stochastic::{RngStream, ScalingParams};

/// Brownian motion `drift * s + scale * B_s` reflected on `[0, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectedBmSpec {
    pub drift: f64,
    pub scale: f64,
    #[serde(with = "crate::stochastic::horizon_serde")]
    pub upper: f64,
}

impl ReflectedBmSpec {
    pub fn new(drift: f64, scale: f64, upper: f64) -> Result<Self> {
        ensure_positive("scale", scale)?;
        if !drift.is_finite() {
            return Err(Error::param("drift", "must be finite"));
        }
        if upper.is_nan() || upper <= 0.0 {
            return Err(Error::param("gamma", format!("upper barrier must be > 0, got {upper}")));
        }
        Ok(Self { drift, scale, upper })
    }

    /// Height-process limit: drift `2(alpha - beta)/kappa^2`, scale `2/kappa`.
    pub fn from_scaling(s: &ScalingParams, gamma: f64) -> Result<Self> {
        Self::new(2.0 * s.drift() / s.kappa2(), 2.0 / s.kappa, gamma)
    }
}

/// Marginal at `s`, started from 0. With no upper barrier the draw is exact
/// (endpoint and running minimum of the free path); otherwise an Euler path
/// of step `~ds` is folded back into `[0, upper]` after every step.
pub fn reflected_bm_sample(spec: &ReflectedBmSpec, s: f64, ds: f64, rng: &mut RngStream) -> Result<f64> {
    ensure_positive("s", s)?;
    ensure_positive("ds", ds)?;
    if spec.upper.is_nan() || spec.upper <= 0.0 {
        return Err(Error::param("gamma", "upper barrier must be > 0"));
    }
    let (d, c) = (spec.drift, spec.scale);
    if spec.upper.is_infinite() {
        let x = d * s + c * s.sqrt() * rng.standard_normal();
        // minimum of a Brownian bridge from 0 to x over [0, s]
        let e = -2.0 * c * c * s * rng.open_uniform().ln();
        let inf = (x - (x * x + e).sqrt()) / 2.0;
        return Ok(x - inf);
    }
    let n = (s / ds).ceil().max(1.0) as usize;
    let h = s / n as f64;
    let (mean, sd) = (d * h, c * h.sqrt());
    let mut y = 0.0;
    for _ in 0..n {
        y = fold(y + mean + sd * rng.standard_normal(), spec.upper);
    }
    Ok(y)
}

/// Mirror image of `y` in `[0, g]`.
fn fold(y: f64, g: f64) -> f64 {
    if (0.0..=g).contains(&y) {
        return y;
    }
    let r = y.rem_euclid(2.0 * g);
    if r > g {
        2.0 * g - r
    } else {
        r
    }
}
