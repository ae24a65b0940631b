use serde::{Deserialize, Serialize};

use super::WitnessCoefficients;
use crate::error::{Error, Result};

/// `θ = κ·√ε`.
pub fn theta_from_bell_deficit(epsilon: f64, kappa: f64) -> Result<f64> {
    if !(epsilon >= 0.0) || !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("need epsilon >= 0 and kappa > 0, got {} and {}", epsilon, kappa)));
    }
    Ok(kappa * epsilon.sqrt())
}

/// Operator-norm bound `√2·θ + θ²` on the deviation of a remote state.
pub fn delta_norm_bound(theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {}", theta)));
    }
    Ok(std::f64::consts::SQRT_2 * theta + theta * theta)
}

/// `Σ |s| · (Π_j (1 + B/p0_j) - 1)` over every coefficient, where `p0[j][k]`
/// is the heralding probability of state `k` on link `j`. With two links this
/// is `B/p0z + B/p0w + B²/(p0z·p0w)`.
pub fn correction_bound(s: &WitnessCoefficients, theta: f64, p0: &[Vec<f64>]) -> Result<f64> {
    if p0.len() != s.state_counts.len() || p0.iter().zip(&s.state_counts).any(|(p, &n)| p.len() != n) {
        return Err(Error::Shape("heralding probabilities do not match the state sets".into()));
    }
    if let Some(bad) = p0.iter().flatten().find(|&&p| !(p > 0.0 && p <= 1.0 + 1e-12)) {
        return Err(Error::ZeroHeralding(format!("heralding probability {} outside (0, 1]", bad)));
    }
    let b = delta_norm_bound(theta)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for row in &s.values {
        for (k, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let ks = s.split_state(k);
            let prod: f64 = ks.iter().enumerate().map(|(j, &kj)| 1.0 + b / p0[j][kj]).product();
            total += c.abs() * (prod - 1.0);
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    Inconclusive,
}

/// Nonseparability is certified iff `J < -correction`.
pub fn robust_verdict(j_exp: f64, correction_max: f64) -> Verdict {
    if j_exp < -correction_max {
        Verdict::Certified
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessLedger {
    pub epsilon: f64,
    pub kappa: f64,
    pub theta: f64,
    pub delta_bound: f64,
    pub p0: Vec<Vec<f64>>,
    pub correction_max: f64,
}

impl RobustnessLedger {
    pub fn from_deficit(s: &WitnessCoefficients, epsilon: f64, kappa: f64, p0: Vec<Vec<f64>>) -> Result<Self> {
        let theta = theta_from_bell_deficit(epsilon, kappa)?;
        Self::from_theta(s, theta, epsilon, kappa, p0)
    }

    pub fn from_theta(s: &WitnessCoefficients, theta: f64, epsilon: f64, kappa: f64, p0: Vec<Vec<f64>>) -> Result<Self> {
        let correction_max = correction_bound(s, theta, &p0)?;
        Ok(Self {
            epsilon,
            kappa,
            theta,
            delta_bound: delta_norm_bound(theta)?,
            p0,
            correction_max,
        })
    }
}
