//! PES help: scenario growth-rate matrices and the bounded skill update.
//!
//! Each helped skill feature moves a fraction `k` of the way toward its
//! ceiling:
//!
//! ```text
//! x ← max(x + k·(x_max − x), x)
//! ```
//!
//! `k` is looked up in a 2×2 matrix indexed by the individual's real prospect
//! class (row) and the class predicted by the PES (column). Matrices are
//! written in display units and scaled by `k_scale` (1/500 by default), so
//! the balanced scenario displays as all ones.

use std::fmt;
use std::str::FromStr;

use crate::population::Individual;
use crate::prediction::ProspectClass;

/// Default factor between displayed k-matrix entries and effective growth rates.
pub const DEFAULT_K_SCALE: f64 = 1.0 / 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    Balanced,
    OnlyLow,
    OnlyHigh,
    BalancedErrorsPenalized,
    Custom,
}

impl ScenarioName {
    /// The four named scenarios, in canonical order.
    pub const NAMED: [ScenarioName; 4] = [
        ScenarioName::Balanced,
        ScenarioName::OnlyLow,
        ScenarioName::OnlyHigh,
        ScenarioName::BalancedErrorsPenalized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Balanced => "balanced",
            ScenarioName::OnlyLow => "onlylow",
            ScenarioName::OnlyHigh => "onlyhigh",
            ScenarioName::BalancedErrorsPenalized => "balanced_errors_penalized",
            ScenarioName::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "balanced" => Ok(ScenarioName::Balanced),
            "onlylow" | "only_low" => Ok(ScenarioName::OnlyLow),
            "onlyhigh" | "only_high" => Ok(ScenarioName::OnlyHigh),
            "balanced_errors_penalized" | "balancederrorspenalized" => Ok(ScenarioName::BalancedErrorsPenalized),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(format!(
                "unknown scenario {other:?} (expected balanced, onlylow, onlyhigh, balanced_errors_penalized or custom)"
            )),
        }
    }
}

/// Growth-rate matrix for one intervention scenario.
///
/// `k_display[real][predicted]`, with Low = 0 and High = 1 on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub k_display: [[f64; 2]; 2],
    pub k_scale: f64,
}

impl ScenarioConfig {
    pub fn named(name: ScenarioName) -> Self {
        let k_display = match name {
            ScenarioName::Balanced | ScenarioName::Custom => [[1.0, 1.0], [1.0, 1.0]],
            ScenarioName::OnlyLow => [[1.0, 0.0], [1.0, 0.0]],
            ScenarioName::OnlyHigh => [[0.0, 1.0], [0.0, 1.0]],
            ScenarioName::BalancedErrorsPenalized => [[1.0, 1.0], [0.5, 1.0]],
        };
        Self {
            name,
            k_display,
            k_scale: DEFAULT_K_SCALE,
        }
    }

    pub fn custom(k_display: [[f64; 2]; 2]) -> Self {
        Self {
            name: ScenarioName::Custom,
            k_display,
            k_scale: DEFAULT_K_SCALE,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_scale.is_finite() && self.k_scale >= 0.0) {
            return Err(format!("scenario.k_scale must be >= 0, got {}", self.k_scale));
        }
        if self.k_display.iter().flatten().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err("scenario matrix entries must be finite and >= 0".into());
        }
        if self.k_display.iter().flatten().any(|k| k * self.k_scale > 1.0) {
            return Err("effective growth rates k_display·k_scale must not exceed 1".into());
        }
        Ok(())
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::named(ScenarioName::Balanced)
    }
}

/// Effective growth rate for an individual with the given real and predicted class.
pub fn k_lookup(scenario: &ScenarioConfig, real: ProspectClass, predicted: ProspectClass) -> f64 {
    scenario.k_display[real.index()][predicted.index()] * scenario.k_scale
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionParams {
    pub x1_max: f64,
    pub x2_max: f64,
    /// Waiting time for low-prospect individuals.
    pub delta_t_u: u32,
    /// Unemployment duration at which individuals leave the pool without a job.
    pub t_u_max: u32,
    /// Prospect threshold: spells longer than this are "low prospect".
    pub t_u_threshold: u32,
}

impl InterventionParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.x1_max.is_finite() && self.x2_max.is_finite()) {
            return Err("intervention.x1_max and x2_max must be finite".into());
        }
        if self.t_u_threshold < 1 {
            return Err("intervention.t_u_threshold must be >= 1".into());
        }
        if self.t_u_max <= self.t_u_threshold {
            return Err(format!(
                "intervention.t_u_max ({}) must exceed t_u_threshold ({})",
                self.t_u_max, self.t_u_threshold
            ));
        }
        Ok(())
    }
}

/// One bounded growth step toward `x_max`. Never decreases `x`.
#[inline]
pub fn update_skill(x: f64, k: f64, x_max: f64) -> f64 {
    (x + k * (x_max - x)).max(x)
}

/// Applies `repetitions` growth steps with rate `k` to both skill features.
pub fn apply_help(individual: &mut Individual, k: f64, params: &InterventionParams, repetitions: u32) {
    debug_assert!(repetitions >= 1);
    for _ in 0..repetitions {
        individual.x1 = update_skill(individual.x1, k, params.x1_max);
        individual.x2 = update_skill(individual.x2, k, params.x2_max);
    }
}
