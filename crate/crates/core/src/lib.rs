//! Agent-based simulation of a labor market in which a public employment
//! service (PES) targets help at job-seekers using a continuously refitted
//! logistic prediction model, and of the long-term fairness effects this has
//! on two groups with unequal skill distributions.
//!
//! The crate is organized along the model's parts:
//!
//! * [`population`] samples job-seekers from the background population,
//! * [`prediction`] fits and evaluates the logistic prospect models,
//! * [`market`] decides who is hired each timestep,
//! * [`intervention`] holds the scenario k-matrices and the skill update,
//! * [`engine`] runs spin-up, the per-timestep cycle and seeded ensembles,
//! * [`metrics`] computes BGSD, counterfactual fraction, equal opportunity
//!   and pool statistics,
//! * [`config`] and [`output`] read configurations and write run artifacts.
//!
//! ```
//! use pes_sim::engine::{run, SimulationConfig};
//!
//! let config = SimulationConfig {
//!     pool_size: 200,
//!     total_steps: 450,
//!     ..SimulationConfig::default()
//! };
//! let out = run(&config, 7).unwrap();
//! assert_eq!(out.rows.len(), 250);
//! assert!(out.rows.last().unwrap().cf_fraction.is_some());
//! ```

pub mod config;
pub mod engine;
pub mod intervention;
pub mod market;
pub mod metrics;
pub mod output;
pub mod population;
pub mod prediction;

#[cfg(doctest)]
mod guide;
