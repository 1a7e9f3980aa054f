//! Prospect prediction with binary logistic regression.
//!
//! Three model variants are fitted on the same history of completed
//! unemployment spells:
//!
//! * [`ModelVariant::Full`] sees `x1` and the protected attribute `x_pr`,
//! * [`ModelVariant::Base`] sees only `x1`,
//! * [`ModelVariant::RealProspect`] sees the total skill `s_real` and serves
//!   as the stand-in for an individual's *true* prospect class.
//!
//! Every model predicts the probability of the event `T_u > T_u^y`, i.e. of
//! belonging to the low-prospect class. Label `true` therefore means "Low".
//!
//! Fitting maximizes the L2-penalized Bernoulli log-likelihood
//!
//! ```text
//! ℓ(w, b) = Σ_i [ y_i·log σ(z_i) + (1 − y_i)·log(1 − σ(z_i)) ] − ½·ridge·‖w‖²,
//! z_i = w·x_i + b
//! ```
//!
//! by Newton's method (IRLS) with step halving. The intercept `b` is not
//! penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::Individual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Features `(x1, x_pr)`.
    Full,
    /// Feature `x1` only.
    Base,
    /// Feature `s_real` only.
    #[serde(rename = "real")]
    RealProspect,
}

impl ModelVariant {
    pub fn n_features(self) -> usize {
        match self {
            ModelVariant::Full => 2,
            ModelVariant::Base | ModelVariant::RealProspect => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Full => "full",
            ModelVariant::Base => "base",
            ModelVariant::RealProspect => "real",
        }
    }

    /// Feature vector this variant reads from an individual. Only the first
    /// [`n_features`](Self::n_features) entries are meaningful.
    pub fn features(self, ind: &Individual) -> [f64; 2] {
        match self {
            ModelVariant::Full => [ind.x1, f64::from(ind.x_pr)],
            ModelVariant::Base => [ind.x1, 0.0],
            ModelVariant::RealProspect => [ind.s_real(), 0.0],
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProspectClass {
    Low,
    High,
}

impl ProspectClass {
    /// Row/column index into the k-matrix: Low = 0, High = 1.
    pub fn index(self) -> usize {
        match self {
            ProspectClass::Low => 0,
            ProspectClass::High => 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{variant} model expects {expected} feature(s), got {got}")]
    ArityMismatch {
        variant: ModelVariant,
        expected: usize,
        got: usize,
    },
    #[error("counterfactual class is only defined for the full model, not {0}")]
    WrongVariant(ModelVariant),
    #[error("model coefficients must be finite")]
    NonFinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("degenerate history: all {n} labels are {}", if *.label { "low" } else { "high" })]
    DegenerateHistory { n: usize, label: bool },
    #[error("need at least 2 rows to fit, got {0}")]
    TooFewRows(usize),
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("Newton system is singular (add a ridge penalty)")]
    Singular,
}

/// A fitted (or hand-built) logistic prospect model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    coefficients: Vec<f64>,
    intercept: f64,
    variant: ModelVariant,
}

impl LogisticModel {
    pub fn new(variant: ModelVariant, coefficients: Vec<f64>, intercept: f64) -> Result<Self, ModelError> {
        if coefficients.len() != variant.n_features() {
            return Err(ModelError::ArityMismatch {
                variant,
                expected: variant.n_features(),
                got: coefficients.len(),
            });
        }
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self {
            coefficients,
            intercept,
            variant,
        })
    }

    pub fn zeros(variant: ModelVariant) -> Self {
        Self {
            coefficients: vec![0.0; variant.n_features()],
            intercept: 0.0,
            variant,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn linear_predictor(&self, features: &[f64]) -> Result<f64, ModelError> {
        if features.len() != self.coefficients.len() {
            return Err(ModelError::ArityMismatch {
                variant: self.variant,
                expected: self.coefficients.len(),
                got: features.len(),
            });
        }
        Ok(linear(&self.coefficients, self.intercept, features))
    }

    /// Probability of the low-prospect event `T_u > T_u^y`.
    pub fn prob_low(&self, features: &[f64]) -> Result<f64, ModelError> {
        self.linear_predictor(features).map(logistic)
    }

    /// Low-prospect probability for an individual, reading the features
    /// appropriate to this model's variant.
    pub fn prob_low_for(&self, ind: &Individual) -> f64 {
        let features = self.variant.features(ind);
        logistic(linear(
            &self.coefficients,
            self.intercept,
            &features[..self.coefficients.len()],
        ))
    }

    pub fn classify_individual(&self, ind: &Individual) -> ProspectClass {
        classify(self.prob_low_for(ind))
    }
}

#[inline]
fn linear(coefficients: &[f64], intercept: f64, features: &[f64]) -> f64 {
    coefficients.iter().zip(features).map(|(c, x)| c * x).sum::<f64>() + intercept
}

/// Overflow-safe logistic function.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Low iff `p_low > 0.5`; a tie goes to High.
pub fn classify(p_low: f64) -> ProspectClass {
    if p_low > 0.5 {
        ProspectClass::Low
    } else {
        ProspectClass::High
    }
}

/// Class the full model would assign if the protected attribute were flipped.
pub fn counterfactual_class(model: &LogisticModel, x1: f64, x_pr: u8) -> Result<ProspectClass, ModelError> {
    if model.variant != ModelVariant::Full {
        return Err(ModelError::WrongVariant(model.variant));
    }
    let flipped = f64::from(1 - x_pr.min(1));
    model.prob_low(&[x1, flipped]).map(classify)
}

/// One completed unemployment spell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub x1: f64,
    pub x_pr: u8,
    pub s_real: f64,
    /// Final unemployment duration, including the hiring step.
    pub t_u: u32,
}

impl HistoryRecord {
    pub fn from_hire(ind: &Individual, t_u: u32) -> Self {
        Self {
            x1: ind.x1,
            x_pr: ind.x_pr,
            s_real: ind.s_real(),
            t_u,
        }
    }

    /// Training label: `true` for the low-prospect event `t_u > threshold`.
    pub fn is_low(&self, t_u_threshold: u32) -> bool {
        self.t_u > t_u_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// L2 penalty on the non-intercept coefficients.
    pub ridge: f64,
    /// Convergence tolerance on the max-norm of the parameter update.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(format!("fit ridge must be >= 0, got {}", self.ridge));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(format!("fit tol must be > 0, got {}", self.tol));
        }
        if self.max_iter < 1 {
            return Err("fit max_iter must be >= 1".into());
        }
        Ok(())
    }
}

/// Result of a fit. `converged == false` means `max_iter` ran out and
/// `model` is the best iterate found.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub model: LogisticModel,
    pub converged: bool,
    pub iterations: usize,
}

/// Penalized log-likelihood of `(coefficients, intercept)` on a dataset.
pub fn penalized_log_likelihood<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[bool],
    coefficients: &[f64],
    intercept: f64,
    ridge: f64,
) -> f64 {
    let ll: f64 = rows
        .iter()
        .zip(labels)
        .map(|(row, &y)| {
            let z = linear(coefficients, intercept, row.as_ref());
            if y {
                -softplus(-z)
            } else {
                -softplus(z)
            }
        })
        .sum();
    ll - 0.5 * ridge * coefficients.iter().map(|c| c * c).sum::<f64>()
}

/// Gradient of [`penalized_log_likelihood`]; the intercept entry is last.
pub fn penalized_gradient<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[bool],
    coefficients: &[f64],
    intercept: f64,
    ridge: f64,
) -> Vec<f64> {
    let k = coefficients.len();
    let mut grad = vec![0.0; k + 1];
    for (row, &y) in rows.iter().zip(labels) {
        let row = row.as_ref();
        let r = f64::from(u8::from(y)) - logistic(linear(coefficients, intercept, row));
        for j in 0..k {
            grad[j] += r * row[j];
        }
        grad[k] += r;
    }
    for j in 0..k {
        grad[j] -= ridge * coefficients[j];
    }
    grad
}

/// Fits a logistic model starting from all-zero coefficients.
pub fn fit_logistic<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[bool],
    options: &FitOptions,
    variant: ModelVariant,
) -> Result<Fit, FitError> {
    fit_logistic_from(rows, labels, options, &LogisticModel::zeros(variant))
}

/// Fits a logistic model with Newton/IRLS starting from `start`.
///
/// The variant of the returned model is that of `start`. Labels must contain
/// both classes; a single-class history has no finite maximizer without the
/// ridge and is reported as [`FitError::DegenerateHistory`].
pub fn fit_logistic_from<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[bool],
    options: &FitOptions,
    start: &LogisticModel,
) -> Result<Fit, FitError> {
    let variant = start.variant;
    let k = variant.n_features();
    if rows.len() != labels.len() {
        return Err(FitError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    if rows.len() < 2 {
        return Err(FitError::TooFewRows(rows.len()));
    }
    if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != k) {
        return Err(ModelError::ArityMismatch {
            variant,
            expected: k,
            got: bad.as_ref().len(),
        }
        .into());
    }
    let n_low = labels.iter().filter(|&&y| y).count();
    if n_low == 0 || n_low == labels.len() {
        return Err(FitError::DegenerateHistory {
            n: labels.len(),
            label: n_low > 0,
        });
    }

    let ridge = options.ridge;
    let mut theta: Vec<f64> = start.coefficients.iter().copied().chain([start.intercept]).collect();
    let mut current = newton_terms(rows, labels, &theta, ridge);

    for iter in 1..=options.max_iter {
        let step = current.newton_step()?;
        let full_norm = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if full_norm < options.tol {
            for (t, s) in theta.iter_mut().zip(&step) {
                *t += s;
            }
            return finish(variant, theta, true, iter);
        }

        // Step halving on likelihood decrease.
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
            let terms = newton_terms(rows, labels, &trial, ridge);
            if terms.objective >= current.objective - 1e-14 * current.objective.abs().max(1.0) {
                accepted = Some((trial, terms));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, terms)) = accepted else {
            // No ascent direction left at double precision.
            return finish(variant, theta, false, iter);
        };
        theta = trial;
        current = terms;
        if scale * full_norm < options.tol {
            return finish(variant, theta, true, iter);
        }
    }
    log::warn!(
        "logistic fit ({variant}) hit max_iter={} without converging",
        options.max_iter
    );
    finish(variant, theta, false, options.max_iter)
}

/// Objective, gradient and negative Hessian at one parameter vector
/// (coefficients followed by the intercept).
struct NewtonTerms {
    objective: f64,
    grad: Vec<f64>,
    /// Row-major `XᵀWX + ridge·I`, intercept unpenalized.
    hess: Vec<f64>,
}

impl NewtonTerms {
    fn newton_step(&self) -> Result<Vec<f64>, FitError> {
        let dim = self.grad.len();
        let h = DMatrix::from_row_slice(dim, dim, &self.hess);
        let g = DVector::from_column_slice(&self.grad);
        let step = match h.clone().cholesky() {
            Some(chol) => chol.solve(&g),
            None => h.lu().solve(&g).ok_or(FitError::Singular)?,
        };
        if step.iter().any(|s| !s.is_finite()) {
            return Err(FitError::Singular);
        }
        Ok(step.iter().copied().collect())
    }
}

fn newton_terms<R: AsRef<[f64]>>(rows: &[R], labels: &[bool], theta: &[f64], ridge: f64) -> NewtonTerms {
    let dim = theta.len();
    let k = dim - 1;
    let mut objective = 0.0;
    let mut grad = vec![0.0; dim];
    let mut hess = vec![0.0; dim * dim];
    let mut x = vec![1.0; dim];
    for (row, &y) in rows.iter().zip(labels) {
        x[..k].copy_from_slice(row.as_ref());
        let z = linear(&theta[..k], theta[k], &x[..k]);
        // p = σ(z) and log-likelihood share one exponential.
        let e = (-z.abs()).exp();
        let p = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
        let log1pe = e.ln_1p();
        objective -= if y { (-z).max(0.0) + log1pe } else { z.max(0.0) + log1pe };
        let r = f64::from(u8::from(y)) - p;
        let w = p * (1.0 - p);
        for a in 0..dim {
            grad[a] += r * x[a];
            let wa = w * x[a];
            for b in a..dim {
                hess[a * dim + b] += wa * x[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            hess[a * dim + b] = hess[b * dim + a];
        }
    }
    for j in 0..k {
        objective -= 0.5 * ridge * theta[j] * theta[j];
        grad[j] -= ridge * theta[j];
        hess[j * dim + j] += ridge;
    }
    NewtonTerms { objective, grad, hess }
}

fn finish(variant: ModelVariant, theta: Vec<f64>, converged: bool, iterations: usize) -> Result<Fit, FitError> {
    let k = variant.n_features();
    let model = LogisticModel::new(variant, theta[..k].to_vec(), theta[k])?;
    Ok(Fit {
        model,
        converged,
        iterations,
    })
}

/// Fits the real-prospect model (`s_real` as the single feature) on a history.
pub fn fit_real_prospect(history: &[HistoryRecord], t_u_threshold: u32, options: &FitOptions) -> Result<Fit, FitError> {
    let rows: Vec<[f64; 1]> = history.iter().map(|r| [r.s_real]).collect();
    let labels: Vec<bool> = history.iter().map(|r| r.is_low(t_u_threshold)).collect();
    fit_logistic(&rows, &labels, options, ModelVariant::RealProspect)
}

/// Fits the PES prediction model (full or base) on a history.
pub fn fit_prediction(
    history: &[HistoryRecord],
    t_u_threshold: u32,
    options: &FitOptions,
    variant: ModelVariant,
) -> Result<Fit, FitError> {
    let labels: Vec<bool> = history.iter().map(|r| r.is_low(t_u_threshold)).collect();
    match variant {
        ModelVariant::Full => {
            let rows: Vec<[f64; 2]> = history.iter().map(|r| [r.x1, f64::from(r.x_pr)]).collect();
            fit_logistic(&rows, &labels, options, variant)
        }
        ModelVariant::Base => {
            let rows: Vec<[f64; 1]> = history.iter().map(|r| [r.x1]).collect();
            fit_logistic(&rows, &labels, options, variant)
        }
        ModelVariant::RealProspect => fit_real_prospect(history, t_u_threshold, options),
    }
}
