use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Point;

/// Transport cost c(x, y).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostFunction {
    /// ‖y − x‖₂^ρ, or Σ_k |y_k − x_k|^ρ when `per_coordinate` is set.
    Power { exponent: f64, per_coordinate: bool },
}

impl CostFunction {
    pub fn power(exponent: f64) -> Self {
        CostFunction::Power { exponent, per_coordinate: false }
    }

    pub fn power_per_coordinate(exponent: f64) -> Self {
        CostFunction::Power { exponent, per_coordinate: true }
    }

    #[inline]
    pub fn evaluate(&self, x: &Point, y: &Point) -> f64 {
        match *self {
            CostFunction::Power { exponent, per_coordinate: false } => x.dist(y).powf(exponent),
            CostFunction::Power { exponent, per_coordinate: true } => x
                .coords()
                .iter()
                .zip(y.coords())
                .map(|(a, b)| (a - b).abs().powf(exponent))
                .sum(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid cost {0:?}; expected power:RHO[:percoord]")]
pub struct CostParseError(pub String);

/// Parses `power:RHO` or `power:RHO:percoord`.
impl FromStr for CostFunction {
    type Err = CostParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CostParseError(s.to_string());
        let mut parts = s.split(':');
        if parts.next() != Some("power") {
            return Err(err());
        }
        let exponent: f64 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
        if !exponent.is_finite() || exponent <= 0.0 {
            return Err(err());
        }
        let per_coordinate = match parts.next() {
            None => false,
            Some("percoord") => true,
            Some(_) => return Err(err()),
        };
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(CostFunction::Power { exponent, per_coordinate })
    }
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::Power { exponent, per_coordinate: false } => write!(f, "power:{exponent}"),
            CostFunction::Power { exponent, per_coordinate: true } => {
                write!(f, "power:{exponent}:percoord")
            }
        }
    }
}
