//! Configuration files.
//!
//! A configuration is a small TOML document with one `key = value` per line,
//! grouped in `[population]`, `[market]`, `[intervention]`, `[scenario]` and
//! `[engine]` sections. Unknown keys are errors; missing keys take the
//! defaults listed by [`key_reference`]. An empty file is the default
//! configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{SimError, SimulationConfig};
use crate::intervention::{InterventionParams, ScenarioConfig, ScenarioName};
use crate::market::MarketParams;
use crate::population::PopulationParams;
use crate::prediction::{FitOptions, ModelVariant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Every configuration key, its default and meaning. Printed by `--help`.
pub fn key_reference() -> String {
    let d = SimulationConfig::default();
    let k = d.scenario.k_display;
    let line = |key: &str, value: String, meaning: &str| {
        if value.len() > 10 {
            format!("  {key:<15} = {value}\n  {:<28}{meaning}\n", "")
        } else {
            format!("  {key:<15} = {value:<10} {meaning}\n")
        }
    };
    let mut out = String::from("CONFIGURATION KEYS (TOML; all optional, defaults shown)\n\n[population]\n");
    out += &line(
        "alpha_pr",
        d.population.alpha_pr.to_string(),
        "group gap in the second skill feature x2",
    );
    out += &line(
        "trunc",
        d.population.trunc.to_string(),
        "truncation of skill noise, in standard deviations",
    );
    out += "\n[market]\n";
    out += &line(
        "alpha_l",
        d.market.alpha_l.to_string(),
        "steepness of the hiring probability in s_real",
    );
    out += &line(
        "beta_l",
        d.market.beta_l.to_string(),
        "location of the hiring probability",
    );
    out += &line(
        "beta_b",
        d.market.beta_b.to_string(),
        "market bias toward the privileged group (0 unbiased, 2 biased)",
    );
    out += "\n[intervention]\n";
    out += &line(
        "x1_max",
        d.intervention.x1_max.to_string(),
        "ceiling of x1 under help; default trunc",
    );
    out += &line(
        "x2_max",
        d.intervention.x2_max.to_string(),
        "ceiling of x2 under help; default (alpha_pr/2 + trunc)/2",
    );
    out += &line(
        "delta_t_u",
        d.intervention.delta_t_u.to_string(),
        "waiting time of low-prospect job-seekers",
    );
    out += &line(
        "t_u_max",
        d.intervention.t_u_max.to_string(),
        "unemployment duration that forces an exit",
    );
    out += &line(
        "t_u_threshold",
        d.intervention.t_u_threshold.to_string(),
        "spells longer than this are low prospect",
    );
    out += "\n[scenario]\n";
    out += &line(
        "name",
        format!("\"{}\"", d.scenario.name.as_str()),
        "balanced | onlylow | onlyhigh | balanced_errors_penalized | custom",
    );
    out += &line(
        "matrix",
        format!("[[{}, {}], [{}, {}]]", k[0][0], k[0][1], k[1][0], k[1][1]),
        "k-matrix, rows real low/high, columns predicted low/high;",
    );
    out += &format!("  {:<28}only allowed with name = \"custom\"\n", "");
    out += &line(
        "k_scale",
        d.scenario.k_scale.to_string(),
        "growth rate per help step = matrix entry * k_scale",
    );
    out += "\n[engine]\n";
    out += &line(
        "model_variant",
        format!("\"{}\"", d.model_variant),
        "full (uses the protected attribute) | base",
    );
    out += &line(
        "pool_size",
        d.pool_size.to_string(),
        "job-seekers in the pool (active + waiting)",
    );
    out += &line(
        "spinup_steps",
        d.spinup_steps.to_string(),
        "timesteps before the PES starts",
    );
    out += &line(
        "spinup_discard",
        d.spinup_discard.to_string(),
        "early timesteps whose spells are never used for training",
    );
    out += &line(
        "total_steps",
        d.total_steps.to_string(),
        "total timesteps including spin-up",
    );
    out += &line(
        "refit_every",
        d.refit_every.to_string(),
        "refit cadence of the prediction models, in timesteps",
    );
    out += &line("n_runs", d.n_runs.to_string(), "ensemble size");
    out += &line("base_seed", d.base_seed.to_string(), "run i uses seed base_seed + i");
    out += &line(
        "fit_ridge",
        format!("{:e}", d.fit.ridge),
        "L2 penalty of the logistic fits (intercept unpenalized)",
    );
    out += &line(
        "fit_tol",
        format!("{:e}", d.fit.tol),
        "Newton convergence tolerance on the parameter step",
    );
    out += &line("fit_max_iter", d.fit.max_iter.to_string(), "Newton iteration cap");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct InterventionSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    x1_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x2_max: Option<f64>,
    delta_t_u: u32,
    t_u_max: u32,
    t_u_threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioSection {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<[[f64; 2]; 2]>,
    k_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EngineSection {
    model_variant: ModelVariant,
    pool_size: usize,
    spinup_steps: u32,
    spinup_discard: u32,
    total_steps: u32,
    refit_every: u32,
    n_runs: usize,
    base_seed: u64,
    fit_ridge: f64,
    fit_tol: f64,
    fit_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    population: PopulationParams,
    market: MarketParams,
    intervention: InterventionSection,
    scenario: ScenarioSection,
    engine: EngineSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let d = SimulationConfig::default();
        Self {
            population: d.population,
            market: d.market,
            intervention: InterventionSection {
                x1_max: None,
                x2_max: None,
                delta_t_u: d.intervention.delta_t_u,
                t_u_max: d.intervention.t_u_max,
                t_u_threshold: d.intervention.t_u_threshold,
            },
            scenario: ScenarioSection {
                name: d.scenario.name.as_str().to_string(),
                matrix: None,
                k_scale: d.scenario.k_scale,
            },
            engine: EngineSection {
                model_variant: d.model_variant,
                pool_size: d.pool_size,
                spinup_steps: d.spinup_steps,
                spinup_discard: d.spinup_discard,
                total_steps: d.total_steps,
                refit_every: d.refit_every,
                n_runs: d.n_runs,
                base_seed: d.base_seed,
                fit_ridge: d.fit.ridge,
                fit_tol: d.fit.tol,
                fit_max_iter: d.fit.max_iter,
            },
        }
    }
}

impl Default for InterventionSection {
    fn default() -> Self {
        ConfigFile::default().intervention
    }
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ConfigFile::default().scenario
    }
}

impl Default for EngineSection {
    fn default() -> Self {
        ConfigFile::default().engine
    }
}

impl ConfigFile {
    fn resolve(self) -> Result<SimulationConfig, ConfigError> {
        let name: ScenarioName = self.scenario.name.parse().map_err(ConfigError::Validation)?;
        let mut scenario = match (name, self.scenario.matrix) {
            (ScenarioName::Custom, Some(m)) => ScenarioConfig::custom(m),
            (ScenarioName::Custom, None) => {
                return Err(ConfigError::Validation(
                    "scenario.name = \"custom\" requires scenario.matrix".into(),
                ))
            }
            (named, Some(m)) if m == ScenarioConfig::named(named).k_display => ScenarioConfig::named(named),
            (named, Some(_)) => {
                return Err(ConfigError::Validation(format!(
                    "scenario.matrix conflicts with the fixed matrix of scenario {named:?}; use name = \"custom\""
                )))
            }
            (named, None) => ScenarioConfig::named(named),
        };
        scenario.k_scale = self.scenario.k_scale;

        let config = SimulationConfig {
            intervention: InterventionParams {
                x1_max: self.intervention.x1_max.unwrap_or(self.population.trunc),
                x2_max: self.intervention.x2_max.unwrap_or_else(|| self.population.x2_upper()),
                delta_t_u: self.intervention.delta_t_u,
                t_u_max: self.intervention.t_u_max,
                t_u_threshold: self.intervention.t_u_threshold,
            },
            population: self.population,
            market: self.market,
            scenario,
            model_variant: self.engine.model_variant,
            fit: FitOptions {
                ridge: self.engine.fit_ridge,
                tol: self.engine.fit_tol,
                max_iter: self.engine.fit_max_iter,
            },
            pool_size: self.engine.pool_size,
            spinup_steps: self.engine.spinup_steps,
            spinup_discard: self.engine.spinup_discard,
            total_steps: self.engine.total_steps,
            refit_every: self.engine.refit_every,
            n_runs: self.engine.n_runs,
            base_seed: self.engine.base_seed,
        };
        config.validate().map_err(|e| match e {
            SimError::InvalidConfig(msg) => ConfigError::Validation(msg),
            other => ConfigError::Validation(other.to_string()),
        })?;
        if i64::try_from(config.base_seed).is_err() {
            return Err(ConfigError::Validation(
                "engine.base_seed must fit in a signed 64-bit integer".into(),
            ));
        }
        Ok(config)
    }

    fn from_config(config: &SimulationConfig) -> Self {
        Self {
            population: config.population,
            market: config.market,
            intervention: InterventionSection {
                x1_max: Some(config.intervention.x1_max),
                x2_max: Some(config.intervention.x2_max),
                delta_t_u: config.intervention.delta_t_u,
                t_u_max: config.intervention.t_u_max,
                t_u_threshold: config.intervention.t_u_threshold,
            },
            scenario: ScenarioSection {
                name: config.scenario.name.as_str().to_string(),
                matrix: Some(config.scenario.k_display),
                k_scale: config.scenario.k_scale,
            },
            engine: EngineSection {
                model_variant: config.model_variant,
                pool_size: config.pool_size,
                spinup_steps: config.spinup_steps,
                spinup_discard: config.spinup_discard,
                total_steps: config.total_steps,
                refit_every: config.refit_every,
                n_runs: config.n_runs,
                base_seed: config.base_seed,
                fit_ridge: config.fit.ridge,
                fit_tol: config.fit.tol,
                fit_max_iter: config.fit.max_iter,
            },
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses configuration text. `origin` only labels error messages.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<SimulationConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_path_buf(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    file.resolve()
}

/// A configuration together with the exact text it was parsed from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: SimulationConfig,
    pub source_text: String,
    pub path: PathBuf,
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let source_text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = parse_config_str(&source_text, path)?;
    Ok(LoadedConfig {
        config,
        source_text,
        path: path.to_path_buf(),
    })
}

impl SimulationConfig {
    /// Fully resolved configuration as TOML, every key explicit.
    pub fn to_toml(&self) -> String {
        let body = toml::to_string(&ConfigFile::from_config(self)).expect("configuration serializes to TOML");
        let mut out = String::from("# Resolved configuration (all defaults made explicit).\n");
        out.push_str(&body);
        out
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}
