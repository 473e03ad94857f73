//! Reproducible randomness, offspring laws, model constants and Poisson
//! point utilities.

mod offspring;
mod params;
mod poisson;
mod rng;

pub use offspring::OffspringLaw;
pub use params::{Criticality, ModelParams, ScalingParams};
pub use poisson::{last_point_before, poisson_points, splice, PointSet};
pub use rng::{exp_from_uniform, exp_sample, RngStream};

/// Serde helpers for levels that may be `+inf` (written as `"inf"`).
pub mod horizon_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && *value > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*value)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => parse(&s).map_err(de::Error::custom),
        }
    }

    /// Parses a float or `inf`.
    pub fn parse(s: &str) -> Result<f64, String> {
        match s.trim() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            other => other
                .parse::<f64>()
                .map_err(|e| format!("expected a number or `inf`, got `{other}`: {e}")),
        }
    }
}
