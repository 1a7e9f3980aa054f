//! Discrete-time simulation of the job-seeker pool, the labor market and the
//! PES.
//!
//! Every timestep runs the same fixed sequence of phases:
//!
//! 1. waiting countdown (individuals whose wait ends rejoin the market),
//! 2. market draws (hires leave and are appended to the history),
//! 3. forced exits at `t_u_max` (no history record),
//! 4. PES classification and help (skipped during spin-up),
//! 5. replenishment from the background population up to `pool_size`,
//! 6. refit of the prediction and real-prospect models,
//! 7. metrics snapshot.
//!
//! A run owns a single seeded ChaCha stream, so `(config, seed)` determines
//! the output bit for bit. Ensembles bind seed `base_seed + i` to run `i` and
//! may execute in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::intervention::{apply_help, k_lookup, InterventionParams, ScenarioConfig};
use crate::market::{draw_hire, job_probability, MarketParams};
use crate::metrics::{self, Decision, MetricsRow};
use crate::population::{sample_individual, Individual, PopulationParams};
use crate::prediction::{
    classify, fit_logistic_from, FitError, FitOptions, HistoryRecord, LogisticModel, ModelVariant, ProspectClass,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate spin-up history for seed {seed}: {detail}")]
    DegenerateHistory { seed: u64, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub population: PopulationParams,
    pub market: MarketParams,
    pub intervention: InterventionParams,
    pub scenario: ScenarioConfig,
    /// Prediction model used by the PES (full or base).
    pub model_variant: ModelVariant,
    pub fit: FitOptions,
    /// Total number of job-seekers, active plus waiting.
    pub pool_size: usize,
    pub spinup_steps: u32,
    /// Spells completed at or before this timestep never enter the history.
    pub spinup_discard: u32,
    pub total_steps: u32,
    pub refit_every: u32,
    pub n_runs: usize,
    pub base_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let population = PopulationParams::default();
        Self {
            intervention: InterventionParams {
                x1_max: population.trunc,
                x2_max: population.x2_upper(),
                delta_t_u: 5,
                t_u_max: 64,
                t_u_threshold: 16,
            },
            population,
            market: MarketParams::default(),
            scenario: ScenarioConfig::default(),
            model_variant: ModelVariant::Full,
            fit: FitOptions::default(),
            pool_size: 1000,
            spinup_steps: 400,
            spinup_discard: 200,
            total_steps: 1000,
            refit_every: 1,
            n_runs: 10,
            base_seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let check = || -> Result<(), String> {
            self.population.validate()?;
            self.market.validate()?;
            self.intervention.validate()?;
            self.scenario.validate()?;
            self.fit.validate()?;
            if self.model_variant == ModelVariant::RealProspect {
                return Err("engine.model_variant must be full or base".into());
            }
            if self.intervention.x1_max < self.population.trunc {
                return Err(format!(
                    "intervention.x1_max ({}) is below the largest sampled x1 ({})",
                    self.intervention.x1_max, self.population.trunc
                ));
            }
            if self.pool_size < 10 {
                return Err(format!("engine.pool_size must be >= 10, got {}", self.pool_size));
            }
            if self.spinup_discard >= self.spinup_steps {
                return Err(format!(
                    "engine.spinup_discard ({}) must be < spinup_steps ({})",
                    self.spinup_discard, self.spinup_steps
                ));
            }
            if self.spinup_steps > self.total_steps {
                return Err(format!(
                    "engine.spinup_steps ({}) must be <= total_steps ({})",
                    self.spinup_steps, self.total_steps
                ));
            }
            if self.refit_every < 1 {
                return Err("engine.refit_every must be >= 1".into());
            }
            if self.n_runs < 1 {
                return Err("engine.n_runs must be >= 1".into());
            }
            Ok(())
        };
        check().map_err(SimError::InvalidConfig)
    }

    /// Seed of ensemble member `run`.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

/// Fitted coefficients of one model at the end of a timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSnapshot {
    pub t: u32,
    pub model: LogisticModel,
}

/// Cumulative pool in- and outflows over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounters {
    /// Individuals drawn from the background population, including the initial pool.
    pub entrants: u64,
    pub hires: u64,
    pub forced_exits: u64,
}

/// Everything a single run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub seed: u64,
    pub fingerprint: String,
    /// One row per timestep `t > spinup_discard`.
    pub rows: Vec<MetricsRow>,
    /// Prediction and real-prospect coefficients from the end of spin-up on.
    pub coefficients: Vec<CoefficientSnapshot>,
    pub flows: FlowCounters,
}

/// Training history with feature rows cached per model variant.
#[derive(Debug, Clone, Default)]
struct History {
    records: Vec<HistoryRecord>,
    full_rows: Vec<[f64; 2]>,
    base_rows: Vec<[f64; 1]>,
    real_rows: Vec<[f64; 1]>,
    labels: Vec<bool>,
}

impl History {
    fn push(&mut self, record: HistoryRecord, t_u_threshold: u32) {
        self.full_rows.push([record.x1, f64::from(record.x_pr)]);
        self.base_rows.push([record.x1]);
        self.real_rows.push([record.s_real]);
        self.labels.push(record.is_low(t_u_threshold));
        self.records.push(record);
    }

    fn len(&self) -> usize {
        self.records.len()
    }

    fn fit(&self, start: &LogisticModel, options: &FitOptions) -> Result<LogisticModel, FitError> {
        let fit = match start.variant() {
            ModelVariant::Full => fit_logistic_from(&self.full_rows, &self.labels, options, start),
            ModelVariant::Base => fit_logistic_from(&self.base_rows, &self.labels, options, start),
            ModelVariant::RealProspect => fit_logistic_from(&self.real_rows, &self.labels, options, start),
        }?;
        if !fit.converged {
            log::warn!(
                "{} model fit did not converge after {} iterations; using best iterate",
                start.variant(),
                fit.iterations
            );
        }
        Ok(fit.model)
    }
}

/// What a single timestep did, beyond the metrics row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub hires: Vec<HistoryRecord>,
    pub forced_exits: usize,
    pub entrants: usize,
    /// Ids of individuals sent to the waiting group in this step's PES phase.
    pub sent_to_waiting: Vec<u64>,
}

/// State of one simulation run.
#[derive(Debug, Clone)]
pub struct Simulation<'c> {
    config: &'c SimulationConfig,
    seed: u64,
    t: u32,
    active: Vec<Individual>,
    waiting: Vec<Individual>,
    history: History,
    fitted_len: usize,
    pred_model: Option<LogisticModel>,
    real_model: Option<LogisticModel>,
    rng: ChaCha8Rng,
    next_id: u64,
    flows: FlowCounters,
    rows: Vec<MetricsRow>,
    coefficients: Vec<CoefficientSnapshot>,
}

impl<'c> Simulation<'c> {
    /// Fresh pool at `t = 0`, before any timestep has run.
    pub fn new(config: &'c SimulationConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let mut sim = Self {
            config,
            seed,
            t: 0,
            active: Vec::with_capacity(config.pool_size),
            waiting: Vec::new(),
            history: History::default(),
            fitted_len: 0,
            pred_model: None,
            real_model: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
            flows: FlowCounters::default(),
            rows: Vec::new(),
            coefficients: Vec::new(),
        };
        sim.replenish();
        Ok(sim)
    }

    /// Runs the intervention-free spin-up and fits the initial models.
    pub fn spin_up(config: &'c SimulationConfig, seed: u64) -> Result<Self, SimError> {
        let mut sim = Self::new(config, seed)?;
        while sim.t < config.spinup_steps {
            sim.advance();
        }
        sim.fit_initial_models()?;
        Ok(sim)
    }

    fn fit_initial_models(&mut self) -> Result<(), SimError> {
        let degenerate = |detail: String| SimError::DegenerateHistory {
            seed: self.seed,
            detail,
        };
        if self.history.len() < 2 {
            return Err(degenerate(format!(
                "only {} completed spells after the discard window; the market parameters are miscalibrated",
                self.history.len()
            )));
        }
        let pred = self
            .history
            .fit(&LogisticModel::zeros(self.config.model_variant), &self.config.fit)
            .map_err(|e| degenerate(e.to_string()))?;
        let real = self
            .history
            .fit(&LogisticModel::zeros(ModelVariant::RealProspect), &self.config.fit)
            .map_err(|e| degenerate(e.to_string()))?;
        self.pred_model = Some(pred);
        self.real_model = Some(real);
        self.fitted_len = self.history.len();
        self.snapshot_coefficients();
        Ok(())
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn active(&self) -> &[Individual] {
        &self.active
    }

    pub fn waiting(&self) -> &[Individual] {
        &self.waiting
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history.records
    }

    pub fn pred_model(&self) -> Option<&LogisticModel> {
        self.pred_model.as_ref()
    }

    pub fn real_model(&self) -> Option<&LogisticModel> {
        self.real_model.as_ref()
    }

    pub fn flows(&self) -> FlowCounters {
        self.flows
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    fn in_spin_up(&self) -> bool {
        self.t <= self.config.spinup_steps
    }

    /// Runs one post-spin-up timestep.
    ///
    /// # Panics
    ///
    /// If called before [`spin_up`](Self::spin_up) has completed.
    pub fn step(&mut self) -> StepReport {
        assert!(
            self.t >= self.config.spinup_steps && self.pred_model.is_some(),
            "step() requires a completed spin-up"
        );
        self.advance()
    }

    /// Runs one timestep, whatever the phase.
    fn advance(&mut self) -> StepReport {
        self.t += 1;
        let cfg = self.config;
        let params = &cfg.intervention;
        let mut report = StepReport::default();

        // 1. Waiting countdown.
        let mut still_waiting = Vec::with_capacity(self.waiting.len());
        for mut ind in self.waiting.drain(..) {
            ind.wait_remaining -= 1;
            ind.t_unemployed += 1;
            if ind.wait_remaining == 0 {
                self.active.push(ind);
            } else {
                still_waiting.push(ind);
            }
        }
        self.waiting = still_waiting;

        // 2. Market draws.
        let record_hires = self.t > cfg.spinup_discard;
        let mut remaining = Vec::with_capacity(self.active.len());
        for mut ind in self.active.drain(..) {
            let p = job_probability(&cfg.market, ind.s_real(), ind.x_pr);
            if draw_hire(&mut self.rng, p) {
                let record = HistoryRecord::from_hire(&ind, ind.t_unemployed + 1);
                if record_hires {
                    self.history.push(record, params.t_u_threshold);
                }
                report.hires.push(record);
            } else {
                ind.t_unemployed += 1;
                remaining.push(ind);
            }
        }
        self.active = remaining;
        self.flows.hires += report.hires.len() as u64;

        // 3. Forced exits.
        let before = self.active.len();
        self.active.retain(|ind| ind.t_unemployed < params.t_u_max);
        report.forced_exits = before - self.active.len();
        self.flows.forced_exits += report.forced_exits as u64;

        // 4. PES classification and help.
        let mut fairness = (None, None);
        if !self.in_spin_up() {
            fairness = self.pes_phase(&mut report);
        }

        // 5. Replenishment.
        report.entrants = self.replenish();

        // 6. Refit.
        if !self.in_spin_up() {
            self.refit();
            self.snapshot_coefficients();
        }

        // 7. Metrics.
        if self.t > cfg.spinup_discard {
            let mut row =
                MetricsRow::pool_snapshot(self.t, &self.active, &self.waiting, &report.hires, report.forced_exits);
            row.cf_fraction = fairness.0;
            row.eo = fairness.1;
            self.rows.push(row);
        }
        report
    }

    /// Classifies and helps every active individual; returns the
    /// (counterfactual fraction, equal opportunity) of this step's decisions.
    fn pes_phase(&mut self, report: &mut StepReport) -> (Option<f64>, Option<f64>) {
        let cfg = self.config;
        let params = &cfg.intervention;
        let pred = self.pred_model.as_ref().expect("prediction model fitted at spin-up");
        let real = self.real_model.as_ref().expect("real-prospect model fitted at spin-up");

        let cf = metrics::counterfactual_fraction(pred, &self.active, real).expect("PES model is full or base");
        let mut decisions = Vec::with_capacity(self.active.len());
        let mut stay = Vec::with_capacity(self.active.len());
        for mut ind in self.active.drain(..) {
            let predicted = classify(pred.prob_low_for(&ind));
            let truth = classify(real.prob_low_for(&ind));
            decisions.push(Decision {
                predicted,
                truth,
                x_pr: ind.x_pr,
            });
            let k = k_lookup(&cfg.scenario, truth, predicted);
            if predicted == ProspectClass::Low && params.delta_t_u > 0 {
                apply_help(&mut ind, k, params, params.delta_t_u + 1);
                ind.wait_remaining = params.delta_t_u;
                report.sent_to_waiting.push(ind.id);
                self.waiting.push(ind);
            } else {
                apply_help(&mut ind, k, params, 1);
                stay.push(ind);
            }
        }
        self.active = stay;
        (cf, metrics::equal_opportunity(&decisions))
    }

    fn replenish(&mut self) -> usize {
        let missing = self
            .config
            .pool_size
            .saturating_sub(self.active.len() + self.waiting.len());
        for _ in 0..missing {
            let ind = sample_individual(&mut self.rng, &self.config.population, self.next_id);
            self.next_id += 1;
            self.active.push(ind);
        }
        self.flows.entrants += missing as u64;
        missing
    }

    fn refit(&mut self) {
        let cfg = self.config;
        if !self.t.is_multiple_of(cfg.refit_every) || self.history.len() == self.fitted_len {
            return;
        }
        let (Some(pred), Some(real)) = (&self.pred_model, &self.real_model) else {
            return;
        };
        match (self.history.fit(pred, &cfg.fit), self.history.fit(real, &cfg.fit)) {
            (Ok(p), Ok(r)) => {
                self.pred_model = Some(p);
                self.real_model = Some(r);
                self.fitted_len = self.history.len();
            }
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("t={}: refit skipped, keeping previous models: {e}", self.t);
            }
        }
    }

    fn snapshot_coefficients(&mut self) {
        for model in [&self.pred_model, &self.real_model].into_iter().flatten() {
            self.coefficients.push(CoefficientSnapshot {
                t: self.t,
                model: model.clone(),
            });
        }
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            seed: self.seed,
            fingerprint: self.config.fingerprint(),
            rows: self.rows,
            coefficients: self.coefficients,
            flows: self.flows,
        }
    }
}

/// Spin-up followed by the intervention phase up to `total_steps`.
pub fn run(config: &SimulationConfig, seed: u64) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::spin_up(config, seed)?;
    while sim.t() < config.total_steps {
        sim.step();
    }
    Ok(sim.finish())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    /// Per-timestep mean over runs.
    pub mean: Vec<MetricsRow>,
    /// Individual runs, in run-index order.
    pub runs: Vec<RunOutput>,
}

/// Runs `config.n_runs` seeded simulations (in parallel) and averages them.
pub fn run_ensemble(config: &SimulationConfig) -> Result<EnsembleOutput, SimError> {
    config.validate()?;
    let runs = (0..config.n_runs)
        .into_par_iter()
        .map(|i| run(config, config.run_seed(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = average_rows(&runs, |v| v);
    Ok(EnsembleOutput { mean, runs })
}

/// Per-timestep arithmetic mean of every metric over `runs`, after mapping
/// each value through `map`. Absent values are skipped; a cell is absent
/// only when it is absent in every run.
pub fn average_rows(runs: &[RunOutput], map: impl Fn(f64) -> f64) -> Vec<MetricsRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    (0..first.rows.len())
        .map(|i| {
            let t = first.rows[i].t;
            let mut sums = [0.0f64; 16];
            let mut counts = [0usize; 16];
            for run in runs {
                debug_assert_eq!(run.rows[i].t, t);
                for (j, v) in run.rows[i].values().into_iter().enumerate() {
                    if let Some(v) = v {
                        sums[j] += map(v);
                        counts[j] += 1;
                    }
                }
            }
            let mut values = [None; 16];
            for j in 0..16 {
                if counts[j] > 0 {
                    values[j] = Some(sums[j] / counts[j] as f64);
                }
            }
            MetricsRow::from_values(t, values)
        })
        .collect()
}

/// Spin-up statistics used to check market calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub n_runs: usize,
    /// Completed spells in the retained spin-up history, over all runs.
    pub n_spells: usize,
    /// Fraction of retained spells with `t_u > t_u_threshold`.
    pub label_balance: f64,
    pub median_t_u: f64,
    /// `t_u_max / median_t_u`.
    pub t_u_max_ratio: f64,
    /// Mean fraction of the underprivileged group in the pool at the end of spin-up.
    pub frac_upriv: f64,
}

impl CalibrationReport {
    pub const LABEL_BALANCE_RANGE: (f64, f64) = (0.4, 0.6);
    pub const T_U_MAX_RATIO_RANGE: (f64, f64) = (3.0, 5.0);

    pub fn label_balance_ok(&self) -> bool {
        let (lo, hi) = Self::LABEL_BALANCE_RANGE;
        (lo..=hi).contains(&self.label_balance)
    }

    pub fn t_u_max_ok(&self) -> bool {
        let (lo, hi) = Self::T_U_MAX_RATIO_RANGE;
        (lo..=hi).contains(&self.t_u_max_ratio)
    }

    pub fn passes(&self) -> bool {
        self.label_balance_ok() && self.t_u_max_ok()
    }
}

/// Runs only the spin-up of every ensemble member and summarizes the
/// retained history.
pub fn calibration_check(config: &SimulationConfig) -> Result<CalibrationReport, SimError> {
    config.validate()?;
    let sims = (0..config.n_runs)
        .into_par_iter()
        .map(|i| {
            let mut sim = Simulation::new(config, config.run_seed(i))?;
            while sim.t() < config.spinup_steps {
                sim.advance();
            }
            let frac = sim.rows.last().and_then(|r| r.frac_upriv).unwrap_or(f64::NAN);
            Ok((sim.history.records, frac))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut t_us: Vec<u32> = sims.iter().flat_map(|(h, _)| h.iter().map(|r| r.t_u)).collect();
    if t_us.is_empty() {
        return Err(SimError::DegenerateHistory {
            seed: config.base_seed,
            detail: "no completed spells during spin-up".into(),
        });
    }
    t_us.sort_unstable();
    let n = t_us.len();
    let median = if n % 2 == 1 {
        f64::from(t_us[n / 2])
    } else {
        0.5 * (f64::from(t_us[n / 2 - 1]) + f64::from(t_us[n / 2]))
    };
    let threshold = config.intervention.t_u_threshold;
    let low = t_us.iter().filter(|&&t| t > threshold).count();
    Ok(CalibrationReport {
        n_runs: config.n_runs,
        n_spells: n,
        label_balance: low as f64 / n as f64,
        median_t_u: median,
        t_u_max_ratio: f64::from(config.intervention.t_u_max) / median,
        frac_upriv: sims.iter().map(|(_, f)| f).sum::<f64>() / sims.len() as f64,
    })
}
