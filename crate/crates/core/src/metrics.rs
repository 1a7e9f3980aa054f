//! Fairness metrics and per-timestep pool statistics.
//!
//! * **BGSD** – between-group skills difference, mean `s_real` of the
//!   underprivileged group minus that of the privileged group. Negative
//!   whenever the privileged group is ahead.
//! * **Counterfactual fraction** – among individuals predicted Low, the share
//!   that are truly High *and* would be predicted High with the opposite
//!   protected attribute.
//! * **Equal opportunity** – `TNR_priv − TNR_upriv`, where the negative class
//!   is Low and `TNR = #(predicted Low ∧ true Low) / #(true Low)`.
//!
//! Undefined values (empty groups, empty denominators) are `None`, never NaN
//! or zero.

use crate::population::Individual;
use crate::prediction::{
    classify, counterfactual_class, HistoryRecord, LogisticModel, ModelError, ModelVariant, ProspectClass,
};

/// One PES decision, as needed by the equal-opportunity metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub predicted: ProspectClass,
    pub truth: ProspectClass,
    pub x_pr: u8,
}

/// Mean `s_real` of the underprivileged and privileged members of a pool.
pub fn group_mean_skills<'a, I>(pool: I) -> (Option<f64>, Option<f64>)
where
    I: IntoIterator<Item = &'a Individual>,
{
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for ind in pool {
        let g = usize::from(ind.x_pr.min(1));
        sums[g] += ind.s_real();
        counts[g] += 1;
    }
    let mean = |g: usize| (counts[g] > 0).then(|| sums[g] / counts[g] as f64);
    (mean(0), mean(1))
}

/// Between-group skills difference, `mean_upriv − mean_priv`.
pub fn bgsd<'a, I>(pool: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a Individual>,
{
    match group_mean_skills(pool) {
        (Some(upriv), Some(priv_)) => Some(upriv - priv_),
        _ => None,
    }
}

/// Counterfactual fraction of `model`'s Low predictions on `pool`, with
/// `real_model` supplying the true class.
///
/// Exactly `0` for the base model, which never reads the protected attribute.
/// `None` if nobody in the pool is predicted Low.
pub fn counterfactual_fraction<'a, I>(
    model: &LogisticModel,
    pool: I,
    real_model: &LogisticModel,
) -> Result<Option<f64>, ModelError>
where
    I: IntoIterator<Item = &'a Individual>,
{
    match model.variant() {
        ModelVariant::Base => return Ok(Some(0.0)),
        ModelVariant::RealProspect => return Err(ModelError::WrongVariant(ModelVariant::RealProspect)),
        ModelVariant::Full => {}
    }
    let mut predicted_low = 0usize;
    let mut flips = 0usize;
    for ind in pool {
        if model.classify_individual(ind) != ProspectClass::Low {
            continue;
        }
        predicted_low += 1;
        if counterfactual_class(model, ind.x1, ind.x_pr)? == ProspectClass::High
            && real_model.classify_individual(ind) == ProspectClass::High
        {
            flips += 1;
        }
    }
    Ok((predicted_low > 0).then(|| flips as f64 / predicted_low as f64))
}

/// `TNR_priv − TNR_upriv` with Low as the negative class. `None` unless both
/// groups contain at least one truly Low decision.
pub fn equal_opportunity(decisions: &[Decision]) -> Option<f64> {
    let mut true_low = [0usize; 2];
    let mut hits = [0usize; 2];
    for d in decisions {
        if d.truth == ProspectClass::Low {
            let g = usize::from(d.x_pr.min(1));
            true_low[g] += 1;
            if d.predicted == ProspectClass::Low {
                hits[g] += 1;
            }
        }
    }
    if true_low.contains(&0) {
        return None;
    }
    let tnr = |g: usize| hits[g] as f64 / true_low[g] as f64;
    Some(tnr(1) - tnr(0))
}

/// Classifies every individual with both models; shorthand for building [`Decision`]s.
pub fn decisions<'a, I>(model: &LogisticModel, real_model: &LogisticModel, pool: I) -> Vec<Decision>
where
    I: IntoIterator<Item = &'a Individual>,
{
    pool.into_iter()
        .map(|ind| Decision {
            predicted: classify(model.prob_low_for(ind)),
            truth: classify(real_model.prob_low_for(ind)),
            x_pr: ind.x_pr,
        })
        .collect()
}

/// Pool composition and hiring statistics for one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuxiliaryMetrics {
    pub frac_upriv: Option<f64>,
    pub frac_waiting_priv: Option<f64>,
    pub frac_waiting_upriv: Option<f64>,
    pub mean_t_u_hires: Option<f64>,
    /// `mean t_u (upriv hires) − mean t_u (priv hires)`.
    pub bgtud_current: Option<f64>,
}

pub fn auxiliary_metrics(active: &[Individual], waiting: &[Individual], hires: &[HistoryRecord]) -> AuxiliaryMetrics {
    let mut members = [0usize; 2];
    let mut in_waiting = [0usize; 2];
    for ind in active {
        members[usize::from(ind.x_pr.min(1))] += 1;
    }
    for ind in waiting {
        let g = usize::from(ind.x_pr.min(1));
        members[g] += 1;
        in_waiting[g] += 1;
    }
    let total = members[0] + members[1];
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);

    let mut t_sum = [0.0f64; 2];
    let mut t_n = [0usize; 2];
    for rec in hires {
        let g = usize::from(rec.x_pr.min(1));
        t_sum[g] += f64::from(rec.t_u);
        t_n[g] += 1;
    }
    let n_hires = t_n[0] + t_n[1];
    let mean_t_u_hires = (n_hires > 0).then(|| (t_sum[0] + t_sum[1]) / n_hires as f64);
    let bgtud_current = (t_n[0] > 0 && t_n[1] > 0).then(|| t_sum[0] / t_n[0] as f64 - t_sum[1] / t_n[1] as f64);

    AuxiliaryMetrics {
        frac_upriv: ratio(members[0], total),
        frac_waiting_priv: ratio(in_waiting[1], members[1]),
        frac_waiting_upriv: ratio(in_waiting[0], members[0]),
        mean_t_u_hires,
        bgtud_current,
    }
}

/// Column names of [`MetricsRow`], in CSV order.
pub const COLUMNS: [&str; 17] = [
    "t",
    "bgsd",
    "bgsd_abs",
    "cf_fraction",
    "eo",
    "mean_s_priv",
    "mean_s_upriv",
    "mean_s",
    "mean_t_u_hires",
    "bgtud_current",
    "frac_upriv",
    "frac_waiting_priv",
    "frac_waiting_upriv",
    "n_active",
    "n_waiting",
    "n_hires",
    "n_forced_exits",
];

/// All metrics for one timestep of one run (or the ensemble mean of several).
///
/// Counts are stored as `f64` so the same row type carries ensemble means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRow {
    pub t: u32,
    pub bgsd: Option<f64>,
    pub bgsd_abs: Option<f64>,
    pub cf_fraction: Option<f64>,
    pub eo: Option<f64>,
    pub mean_s_priv: Option<f64>,
    pub mean_s_upriv: Option<f64>,
    pub mean_s: Option<f64>,
    pub mean_t_u_hires: Option<f64>,
    pub bgtud_current: Option<f64>,
    pub frac_upriv: Option<f64>,
    pub frac_waiting_priv: Option<f64>,
    pub frac_waiting_upriv: Option<f64>,
    pub n_active: Option<f64>,
    pub n_waiting: Option<f64>,
    pub n_hires: Option<f64>,
    pub n_forced_exits: Option<f64>,
}

impl MetricsRow {
    /// Every column after `t`, in [`COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 16] {
        [
            self.bgsd,
            self.bgsd_abs,
            self.cf_fraction,
            self.eo,
            self.mean_s_priv,
            self.mean_s_upriv,
            self.mean_s,
            self.mean_t_u_hires,
            self.bgtud_current,
            self.frac_upriv,
            self.frac_waiting_priv,
            self.frac_waiting_upriv,
            self.n_active,
            self.n_waiting,
            self.n_hires,
            self.n_forced_exits,
        ]
    }

    pub fn from_values(t: u32, v: [Option<f64>; 16]) -> Self {
        let [bgsd, bgsd_abs, cf_fraction, eo, mean_s_priv, mean_s_upriv, mean_s, mean_t_u_hires, bgtud_current, frac_upriv, frac_waiting_priv, frac_waiting_upriv, n_active, n_waiting, n_hires, n_forced_exits] =
            v;
        Self {
            t,
            bgsd,
            bgsd_abs,
            cf_fraction,
            eo,
            mean_s_priv,
            mean_s_upriv,
            mean_s,
            mean_t_u_hires,
            bgtud_current,
            frac_upriv,
            frac_waiting_priv,
            frac_waiting_upriv,
            n_active,
            n_waiting,
            n_hires,
            n_forced_exits,
        }
    }

    /// Value of a named column; `None` for unknown names or absent values.
    pub fn get(&self, column: &str) -> Option<f64> {
        if column == "t" {
            return Some(f64::from(self.t));
        }
        let idx = COLUMNS.iter().position(|c| *c == column)?;
        self.values()[idx - 1]
    }

    /// Pool-state metrics for the end of a timestep. PES-dependent columns
    /// (`cf_fraction`, `eo`) are left for the caller.
    pub fn pool_snapshot(
        t: u32,
        active: &[Individual],
        waiting: &[Individual],
        hires: &[HistoryRecord],
        n_forced_exits: usize,
    ) -> Self {
        let pool = || active.iter().chain(waiting);
        let (upriv, priv_) = group_mean_skills(pool());
        let n = active.len() + waiting.len();
        let mean_s = (n > 0).then(|| pool().map(Individual::s_real).sum::<f64>() / n as f64);
        let diff = match (upriv, priv_) {
            (Some(u), Some(p)) => Some(u - p),
            _ => None,
        };
        let aux = auxiliary_metrics(active, waiting, hires);
        Self {
            t,
            bgsd: diff,
            bgsd_abs: diff.map(f64::abs),
            cf_fraction: None,
            eo: None,
            mean_s_priv: priv_,
            mean_s_upriv: upriv,
            mean_s,
            mean_t_u_hires: aux.mean_t_u_hires,
            bgtud_current: aux.bgtud_current,
            frac_upriv: aux.frac_upriv,
            frac_waiting_priv: aux.frac_waiting_priv,
            frac_waiting_upriv: aux.frac_waiting_upriv,
            n_active: Some(active.len() as f64),
            n_waiting: Some(waiting.len() as f64),
            n_hires: Some(hires.len() as f64),
            n_forced_exits: Some(n_forced_exits as f64),
        }
    }
}
