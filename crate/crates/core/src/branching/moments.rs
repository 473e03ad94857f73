use crate::stochastic::{ModelParams, ScalingParams};

/// `E Z_t = z0 exp((a lambda - mu) t)`.
pub fn mean_population(t: f64, params: &ModelParams, z0: f64) -> f64 {
    z0 * (params.malthusian() * t).exp()
}

/// `E X_t` for the rescaled process started from `floor(N x) / N`.
pub fn scaled_mean(t: f64, scaling: &ScalingParams) -> f64 {
    scaling.initial_mass() * (scaling.drift() * t).exp()
}

/// `E X_t^2`, solving `m2' = 2 b m2 + c_N m1` with `m2(0) = x0^2`.
pub fn second_moment_population(t: f64, scaling: &ScalingParams) -> f64 {
    let x0 = scaling.initial_mass();
    let b = scaling.drift();
    let c = scaling.second_moment_coefficient();
    let e = (b * t).exp();
    // (e^{bt} - 1) / b, with its b = 0 limit t
    let growth = if b == 0.0 { t } else { (b * t).exp_m1() / b };
    x0 * x0 * e * e + c * x0 * e * growth
}
