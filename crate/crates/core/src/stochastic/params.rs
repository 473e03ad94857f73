use serde::{Deserialize, Serialize};

use super::{horizon_serde, OffspringLaw};
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

/// `(pi, lambda, mu, Gamma)`: batch law, birth-event hazard, death hazard and
/// killing horizon, all per unit of tree time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr")]
pub struct ModelParams {
    pub offspring: OffspringLaw,
    pub lambda: f64,
    pub mu: f64,
    #[serde(with = "horizon_serde")]
    pub gamma: f64,
}

#[derive(Deserialize)]
struct ModelRepr {
    offspring: OffspringLaw,
    lambda: f64,
    mu: f64,
    #[serde(with = "horizon_serde")]
    gamma: f64,
}

impl TryFrom<ModelRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        ModelParams::new(r.offspring, r.lambda, r.mu, r.gamma)
    }
}

impl ModelParams {
    /// `gamma = f64::INFINITY` is accepted only when `a * lambda < mu`.
    pub fn new(offspring: OffspringLaw, lambda: f64, mu: f64, gamma: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("mu", mu)?;
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::param("gamma", format!("must be > 0, got {gamma}")));
        }
        if gamma.is_infinite() && offspring.mean() * lambda >= mu {
            return Err(Error::param(
                "gamma",
                format!(
                    "an infinite horizon needs a*lambda < mu, got a*lambda = {} and mu = {mu}",
                    offspring.mean() * lambda
                ),
            ));
        }
        Ok(Self {
            offspring,
            lambda,
            mu,
            gamma,
        })
    }

    /// Mean offspring flux minus death rate, `a*lambda - mu`.
    pub fn malthusian(&self) -> f64 {
        self.offspring.mean() * self.lambda - self.mu
    }

    pub fn criticality(&self) -> Criticality {
        let flux = self.offspring.mean() * self.lambda;
        if flux < self.mu {
            Criticality::Subcritical
        } else if flux > self.mu {
            Criticality::Supercritical
        } else {
            Criticality::Critical
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.offspring.clone(), self.lambda, self.mu, gamma)
    }
}

/// The `N`-indexed rescaled family: `lambda_N = N sigma^2/(2a) + alpha/a`,
/// `mu_N = N sigma^2/2 + beta`, with `kappa^2 = sigma^2 delta` and
/// `nu = kappa sqrt(delta)`. Serialises both raw and derived fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalingRepr")]
pub struct ScalingParams {
    pub n_scale: u32,
    pub x0: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub offspring: OffspringLaw,
    pub lambda_n: f64,
    pub mu_n: f64,
    pub kappa: f64,
    pub nu: f64,
    pub slope: f64,
    pub local_time_unit: f64,
}

#[derive(Deserialize)]
struct ScalingRepr {
    #[serde(alias = "n")]
    n_scale: u32,
    #[serde(alias = "x")]
    x0: f64,
    sigma: f64,
    alpha: f64,
    beta: f64,
    offspring: OffspringLaw,
}

impl TryFrom<ScalingRepr> for ScalingParams {
    type Error = Error;

    fn try_from(r: ScalingRepr) -> Result<Self> {
        ScalingParams::new(r.n_scale, r.x0, r.sigma, r.alpha, r.beta, r.offspring)
    }
}

impl ScalingParams {
    pub fn new(
        n_scale: u32,
        x0: f64,
        sigma: f64,
        alpha: f64,
        beta: f64,
        offspring: OffspringLaw,
    ) -> Result<Self> {
        if n_scale == 0 {
            return Err(Error::param("n_scale", "must be >= 1"));
        }
        ensure_positive("x0", x0)?;
        ensure_positive("sigma", sigma)?;
        ensure_nonnegative("alpha", alpha)?;
        ensure_nonnegative("beta", beta)?;
        let n = n_scale as f64;
        let a = offspring.mean();
        let delta = offspring.delta();
        let lambda_n = n * sigma * sigma / (2.0 * a) + alpha / a;
        let mu_n = n * sigma * sigma / 2.0 + beta;
        let kappa2 = sigma * sigma * delta;
        Ok(Self {
            n_scale,
            x0,
            sigma,
            alpha,
            beta,
            lambda_n,
            mu_n,
            kappa: kappa2.sqrt(),
            nu: (kappa2 * delta).sqrt(),
            slope: 2.0 * n,
            local_time_unit: 4.0 / (n * kappa2 * delta),
            offspring,
        })
    }

    /// Same family at a different `N`.
    pub fn with_n(&self, n_scale: u32) -> Result<Self> {
        Self::new(
            n_scale,
            self.x0,
            self.sigma,
            self.alpha,
            self.beta,
            self.offspring.clone(),
        )
    }

    pub fn n(&self) -> f64 {
        self.n_scale as f64
    }

    pub fn kappa2(&self) -> f64 {
        self.sigma * self.sigma * self.offspring.delta()
    }

    /// `alpha - beta`, the drift of the rescaled mass.
    pub fn drift(&self) -> f64 {
        self.alpha - self.beta
    }

    /// Number of ancestors, `floor(N x)`.
    pub fn initial_count(&self) -> u64 {
        (self.n() * self.x0).floor() as u64
    }

    /// `floor(N x) / N`.
    pub fn initial_mass(&self) -> f64 {
        self.initial_count() as f64 / self.n()
    }

    /// Factor turning a rescaled mass into a normalized local time, `4/(kappa^2 delta)`.
    pub fn mass_to_local_time(&self) -> f64 {
        4.0 / (self.kappa2() * self.offspring.delta())
    }

    /// Genealogy of the rescaled population: rates `(lambda_N, mu_N)` per
    /// unit tree time.
    pub fn tree_model(&self, gamma: f64) -> Result<ModelParams> {
        ModelParams::new(self.offspring.clone(), self.lambda_n, self.mu_n, gamma)
    }

    /// Switch intensities per unit exploration time of the rescaled height
    /// SDE: `(a^{-1} delta (N^2 kappa^2 + 2N alpha), delta (N^2 kappa^2 + 2N beta))`.
    pub fn paper_sde_intensities(&self) -> (f64, f64) {
        let n = self.n();
        let a = self.offspring.mean();
        let delta = self.offspring.delta();
        let k2 = self.kappa2();
        (
            delta * (n * n * k2 + 2.0 * n * self.alpha) / a,
            delta * (n * n * k2 + 2.0 * n * self.beta),
        )
    }

    /// Per-height `(birth, death)` hazards implied by the SDE intensities
    /// at slope `2N`.
    pub fn paper_sde_rates(&self) -> (f64, f64) {
        let (up, down) = self.paper_sde_intensities();
        (up / self.slope, down / self.slope)
    }

    pub fn paper_sde_model(&self, gamma: f64) -> Result<ModelParams> {
        let (birth, death) = self.paper_sde_rates();
        ModelParams::new(self.offspring.clone(), birth, death, gamma)
    }

    /// Coefficient of `int X ds` in the second-moment equation,
    /// `(sigma^2 N + 2 alpha)/(2aN) E[Theta^2] + (sigma^2 N + 2 beta)/(2N)`.
    pub fn second_moment_coefficient(&self) -> f64 {
        let n = self.n();
        let a = self.offspring.mean();
        let s2 = self.sigma * self.sigma;
        (s2 * n + 2.0 * self.alpha) / (2.0 * a * n) * self.offspring.second_moment()
            + (s2 * n + 2.0 * self.beta) / (2.0 * n)
    }

    /// Predictable quadratic variation rate of the mass martingale,
    /// `kappa^2 + ((alpha/a)(zeta^2 + a^2) + beta) / N`.
    pub fn quad_var_coefficient(&self) -> f64 {
        let a = self.offspring.mean();
        let zeta2 = self.offspring.zeta2();
        self.kappa2() + ((self.alpha / a) * (zeta2 + a * a) + self.beta) / self.n()
    }
}
