//! Labor market: per-timestep hiring probability as a logistic function of
//! total skill, shifted by an optional bias in favor of the privileged group.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::prediction::logistic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketParams {
    /// Steepness of the hiring curve in `s_real`.
    pub alpha_l: f64,
    /// Location of the hiring curve.
    pub beta_l: f64,
    /// Bias strength; `0` is unbiased, `2` is the biased setting.
    pub beta_b: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            alpha_l: 1.2,
            beta_l: 3.5,
            beta_b: 0.0,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha_l.is_finite() && self.alpha_l > 0.0) {
            return Err(format!("market.alpha_l must be > 0, got {}", self.alpha_l));
        }
        if !self.beta_l.is_finite() {
            return Err(format!("market.beta_l must be finite, got {}", self.beta_l));
        }
        if !(self.beta_b.is_finite() && self.beta_b >= 0.0) {
            return Err(format!("market.beta_b must be >= 0, got {}", self.beta_b));
        }
        Ok(())
    }
}

/// Group-dependent shift `beta_b · (x_pr − ½)`.
pub fn bias_term(beta_b: f64, x_pr: u8) -> f64 {
    beta_b * (f64::from(x_pr) - 0.5)
}

/// Probability of being hired in the current timestep. Independent of how
/// long the individual has been unemployed.
pub fn job_probability(params: &MarketParams, s: f64, x_pr: u8) -> f64 {
    logistic(params.alpha_l * s - params.beta_l + bias_term(params.beta_b, x_pr))
}

/// Bernoulli draw with success probability `p`.
pub fn draw_hire<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}
