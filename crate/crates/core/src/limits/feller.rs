use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::stochastic::{RngStream, ScalingParams};

/// `dX = b X dt + kappa sqrt(X) dW`, `X_0 = x0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerSpec {
    pub x0: f64,
    pub drift_b: f64,
    pub kappa: f64,
}

impl FellerSpec {
    pub fn new(x0: f64, drift_b: f64, kappa: f64) -> Result<Self> {
        ensure_nonnegative("x0", x0)?;
        ensure_nonnegative("kappa", kappa)?;
        if !drift_b.is_finite() {
            return Err(Error::param("drift_b", "must be finite"));
        }
        Ok(Self { x0, drift_b, kappa })
    }

    /// Limit of the rescaled population started from mass `x`.
    pub fn from_scaling(s: &ScalingParams) -> Self {
        Self {
            x0: s.x0,
            drift_b: s.drift(),
            kappa: s.kappa,
        }
    }

    pub fn mean(&self, t: f64) -> f64 {
        self.x0 * (self.drift_b * t).exp()
    }

    pub fn variance(&self, t: f64) -> f64 {
        let b = self.drift_b;
        let k2 = self.kappa * self.kappa;
        if b == 0.0 {
            self.x0 * k2 * t
        } else {
            self.x0 * k2 * (b * t).exp() * (b * t).exp_m1() / b
        }
    }

    /// Scale of the exponential clusters, `kappa^2 (e^{bt} - 1) / (2b)`.
    fn cluster_scale(&self, t: f64) -> f64 {
        let b = self.drift_b;
        let k2 = self.kappa * self.kappa;
        if b == 0.0 {
            k2 * t / 2.0
        } else {
            k2 * (b * t).exp_m1() / (2.0 * b)
        }
    }
}

/// Exact draw of `X_t`: a Poisson number of independent exponential
/// clusters, read off the Laplace transform `exp(-x u_t(l))` with
/// `u_t(l) = l e^{bt} / (1 + l c_t)`.
pub fn feller_exact_sample(spec: &FellerSpec, t: f64, rng: &mut RngStream) -> Result<f64> {
    ensure_positive("t", t)?;
    if spec.x0 == 0.0 {
        return Ok(0.0);
    }
    if spec.kappa == 0.0 {
        return Ok(spec.mean(t));
    }
    let c = spec.cluster_scale(t);
    let clusters = spec.mean(t) / c;
    let k = Poisson::new(clusters)
        .map_err(|e| Error::param("kappa", e.to_string()))?
        .sample(rng);
    if k == 0.0 {
        return Ok(0.0);
    }
    Ok(Gamma::new(k, c)
        .map_err(|e| Error::param("kappa", e.to_string()))?
        .sample(rng))
}

fn euler_steps(horizon: f64, dt: f64) -> Result<(usize, f64)> {
    ensure_positive("T", horizon)?;
    ensure_positive("dt", dt)?;
    if dt >= horizon {
        return Err(Error::param("dt", format!("must be < T = {horizon}")));
    }
    let n = (horizon / dt).round() as usize;
    Ok((n, horizon / n as f64))
}

/// Full-truncation Euler scheme on a grid of step `~dt`; returns the values
/// at all grid points including 0 and `horizon`. Moment bias is `O(dt)`.
pub fn feller_euler_path(
    spec: &FellerSpec,
    horizon: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (n, h) = euler_steps(horizon, dt)?;
    let mut out = Vec::with_capacity(n + 1);
    let mut x = spec.x0;
    out.push(x);
    for _ in 0..n {
        x = euler_step(spec, x, h, rng);
        out.push(x);
    }
    Ok(out)
}

/// Endpoint of [`feller_euler_path`] without storing the path.
pub fn feller_euler_endpoint(spec: &FellerSpec, horizon: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    let (n, h) = euler_steps(horizon, dt)?;
    let mut x = spec.x0;
    for _ in 0..n {
        if x == 0.0 {
            break;
        }
        x = euler_step(spec, x, h, rng);
    }
    Ok(x)
}

#[inline]
fn euler_step(spec: &FellerSpec, x: f64, h: f64, rng: &mut RngStream) -> f64 {
    let xp = x.max(0.0);
    let next = x + spec.drift_b * xp * h + spec.kappa * (xp * h).sqrt() * rng.standard_normal();
    next.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::sample_moments;

    #[test]
    fn degenerate_cases() {
        let mut rng = RngStream::new(1, 0);
        let s = FellerSpec::new(1.5, 0.3, 0.0).unwrap();
        assert_eq!(feller_exact_sample(&s, 2.0, &mut rng).unwrap(), 1.5 * 0.6f64.exp());
        let z = FellerSpec::new(0.0, 0.3, 1.0).unwrap();
        assert_eq!(feller_exact_sample(&z, 2.0, &mut rng).unwrap(), 0.0);
        assert!(feller_exact_sample(&s, 0.0, &mut rng).is_err());
        let e = feller_euler_path(&s, 1.0, 1e-3, &mut rng).unwrap();
        assert!((e.last().unwrap() - 1.5 * 0.3f64.exp()).abs() < 1e-3);
        assert!(feller_euler_path(&s, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn exact_moments() {
        let mut rng = RngStream::new(2, 0);
        for b in [-0.5, 0.0, 0.5] {
            for kappa in [0.5, 1.0, 2.0] {
                let s = FellerSpec::new(1.0, b, kappa).unwrap();
                let xs: Vec<f64> = (0..40_000)
                    .map(|_| feller_exact_sample(&s, 1.0, &mut rng).unwrap())
                    .collect();
                let m = sample_moments(&xs).unwrap();
                assert!((m.mean - s.mean(1.0)).abs() < 5.0 * m.se_mean, "b={b} k={kappa}");
                assert!(
                    (m.variance - s.variance(1.0)).abs() < 5.0 * m.se_variance,
                    "b={b} k={kappa}: {} vs {}",
                    m.variance,
                    s.variance(1.0)
                );
            }
        }
    }

    #[test]
    fn atom_at_zero() {
        let mut rng = RngStream::new(3, 0);
        let s = FellerSpec::new(1.0, 0.0, 1.0).unwrap();
        let zeros = (0..20_000)
            .filter(|_| feller_exact_sample(&s, 1.0, &mut rng).unwrap() == 0.0)
            .count() as f64
            / 20_000.0;
        // P(X_1 = 0) = exp(-x / c_1) with c_1 = 1/2
        let p = (-2.0f64).exp();
        assert!((zeros - p).abs() < 5.0 * (p * (1.0 - p) / 20_000.0).sqrt());
    }
}
