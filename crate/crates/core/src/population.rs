//! Background population: individuals with two skill features whose
//! distribution differs between the two protected-attribute groups.
//!
//! `x1` is drawn from a standard normal truncated at `±trunc`. `x2` carries
//! the group gap:
//!
//! ```text
//! x2 = ½ · ( alpha_pr · (x_pr − ½) + N_trunc(0, 1) )
//! ```
//!
//! and the "real" skill of an individual is the mean of both features. The
//! background pool is unlimited, so individuals are sampled on demand.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Protected attribute value of the underprivileged group.
pub const UNDERPRIVILEGED: u8 = 0;
/// Protected attribute value of the privileged group.
pub const PRIVILEGED: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationParams {
    /// Group-gap coefficient on `x2`.
    pub alpha_pr: f64,
    /// Truncation half-width, in standard deviations.
    pub trunc: f64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self {
            alpha_pr: 2.5,
            trunc: 2.0,
        }
    }
}

impl PopulationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha_pr.is_finite() && self.alpha_pr >= 0.0) {
            return Err(format!("population.alpha_pr must be >= 0, got {}", self.alpha_pr));
        }
        if !(self.trunc.is_finite() && self.trunc > 0.0) {
            return Err(format!("population.trunc must be > 0, got {}", self.trunc));
        }
        Ok(())
    }

    /// Range `x2` can take for a member of group `x_pr`.
    pub fn x2_bounds(&self, x_pr: u8) -> (f64, f64) {
        let shift = self.alpha_pr * (f64::from(x_pr) - 0.5);
        (0.5 * (shift - self.trunc), 0.5 * (shift + self.trunc))
    }

    /// Largest `x2` any individual can be sampled with (the privileged upper bound).
    pub fn x2_upper(&self) -> f64 {
        self.x2_bounds(PRIVILEGED).1.max(self.x2_bounds(UNDERPRIVILEGED).1)
    }
}

/// One job-seeker.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub x1: f64,
    pub x2: f64,
    /// Protected attribute, `0` (underprivileged) or `1` (privileged).
    pub x_pr: u8,
    /// Timesteps spent unemployed so far.
    pub t_unemployed: u32,
    /// Timesteps left in the waiting group; `0` means active on the market.
    pub wait_remaining: u32,
}

impl Individual {
    pub fn s_real(&self) -> f64 {
        s_real(self.x1, self.x2)
    }

    pub fn is_waiting(&self) -> bool {
        self.wait_remaining > 0
    }

    pub fn is_privileged(&self) -> bool {
        self.x_pr == PRIVILEGED
    }
}

/// Total skill: the mean of the two skill features.
#[inline]
pub fn s_real(x1: f64, x2: f64) -> f64 {
    0.5 * (x1 + x2)
}

/// Draws from `N(0, 1)` conditioned on `|value| <= trunc`, by rejection.
pub fn sample_truncated_standard_normal<R: Rng + ?Sized>(rng: &mut R, trunc: f64) -> f64 {
    debug_assert!(trunc > 0.0);
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= trunc {
            return z;
        }
    }
}

/// Samples a fresh individual from the background population.
///
/// Draw order is fixed (group, then `x1`, then the `x2` noise) so runs are
/// reproducible for a given random stream.
pub fn sample_individual<R: Rng + ?Sized>(rng: &mut R, params: &PopulationParams, id: u64) -> Individual {
    let x_pr = if rng.random_bool(0.5) {
        PRIVILEGED
    } else {
        UNDERPRIVILEGED
    };
    let x1 = sample_truncated_standard_normal(rng, params.trunc);
    let noise = sample_truncated_standard_normal(rng, params.trunc);
    let x2 = 0.5 * (params.alpha_pr * (f64::from(x_pr) - 0.5) + noise);
    Individual {
        id,
        x1,
        x2,
        x_pr,
        t_unemployed: 0,
        wait_remaining: 0,
    }
}
