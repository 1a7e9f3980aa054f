//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod invariants;

use pes_sim::prediction::{fit_logistic, penalized_gradient, FitOptions, ModelVariant};

/// A tiny labelled dataset for the logistic-fit oracle.
pub struct Dataset {
    pub name: &'static str,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub ridge: f64,
}

impl Dataset {
    pub fn variant(&self) -> ModelVariant {
        if self.rows[0].len() == 2 {
            ModelVariant::Full
        } else {
            ModelVariant::Base
        }
    }
}

pub fn tiny_datasets() -> Vec<Dataset> {
    vec![
        Dataset {
            name: "two separable points",
            rows: vec![vec![-1.0], vec![1.0]],
            labels: vec![true, false],
            ridge: 1e-3,
        },
        Dataset {
            name: "six overlapping points",
            rows: [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0].iter().map(|&x| vec![x]).collect(),
            labels: vec![true, true, false, true, false, false],
            ridge: 1e-6,
        },
        Dataset {
            name: "unbalanced labels",
            rows: [0.3, -0.7, 1.1, 1.9, -1.4, 0.2, 0.8].iter().map(|&x| vec![x]).collect(),
            labels: vec![false, false, false, true, false, true, false],
            ridge: 1e-2,
        },
        Dataset {
            name: "two features, binary group",
            rows: vec![
                vec![-1.5, 0.0],
                vec![-0.5, 0.0],
                vec![0.5, 0.0],
                vec![1.0, 0.0],
                vec![-1.0, 1.0],
                vec![0.0, 1.0],
                vec![0.7, 1.0],
                vec![1.6, 1.0],
            ],
            labels: vec![true, true, false, true, true, false, false, false],
            ridge: 1e-6,
        },
        Dataset {
            name: "two continuous features",
            rows: vec![
                vec![0.2, -1.0],
                vec![-0.4, 0.6],
                vec![1.3, 0.1],
                vec![-1.1, -0.3],
                vec![0.6, 1.2],
                vec![-0.2, -0.8],
                vec![0.9, -0.5],
            ],
            labels: vec![true, false, false, true, false, true, true],
            ridge: 0.1,
        },
    ]
}

/// Penalized Bernoulli log-likelihood written out directly.
pub fn oracle_log_likelihood(ds: &Dataset, w: &[f64], b: f64) -> f64 {
    let mut ll = 0.0;
    for (row, &y) in ds.rows.iter().zip(&ds.labels) {
        let z: f64 = row.iter().zip(w).map(|(x, c)| x * c).sum::<f64>() + b;
        let p = 1.0 / (1.0 + (-z).exp());
        ll += if y { p.ln() } else { (1.0 - p).ln() };
    }
    ll - 0.5 * ds.ridge * w.iter().map(|c| c * c).sum::<f64>()
}

const SLOPE_RANGE: (f64, f64) = (-20.0, 20.0);
const INTERCEPT_RANGE: (f64, f64) = (-5.0, 5.0);

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn best_on_grid(ds: &Dataset, axes: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let dims = axes.len();
    let mut idx = vec![0usize; dims];
    let mut best = (f64::NEG_INFINITY, vec![0.0; dims]);
    loop {
        let theta: Vec<f64> = idx.iter().zip(axes).map(|(&i, a)| a[i]).collect();
        let ll = oracle_log_likelihood(ds, &theta[..dims - 1], theta[dims - 1]);
        if ll > best.0 {
            best = (ll, theta);
        }
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dims {
                return best;
            }
        }
    }
}

/// Grid search over slopes in [-20, 20] and intercept in [-5, 5]: a full
/// coarse grid, then repeated local grids five times finer around the best
/// point down to a spacing of 1e-7.
pub fn grid_oracle(ds: &Dataset) -> (f64, Vec<f64>) {
    let k = ds.rows[0].len();
    let mut step = if k == 1 { 0.05 } else { 0.2 };
    let mut axes: Vec<Vec<f64>> = (0..k)
        .map(|_| axis(SLOPE_RANGE.0, SLOPE_RANGE.1, step))
        .chain([axis(INTERCEPT_RANGE.0, INTERCEPT_RANGE.1, step)])
        .collect();
    let mut best = best_on_grid(ds, &axes);
    while step > 1e-7 {
        let window = 4.0 * step;
        step /= 5.0;
        axes = best
            .1
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let (lo, hi) = if j < k { SLOPE_RANGE } else { INTERCEPT_RANGE };
                axis((c - window).max(lo), (c + window).min(hi), step)
            })
            .collect();
        best = best_on_grid(ds, &axes);
    }
    best
}

/// Central finite-difference gradient of the oracle likelihood.
pub fn finite_difference_gradient(ds: &Dataset, theta: &[f64]) -> Vec<f64> {
    let k = theta.len() - 1;
    (0..theta.len())
        .map(|j| {
            let h = 1e-5 * theta[j].abs().max(1.0);
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[j] += h;
            down[j] -= h;
            (oracle_log_likelihood(ds, &up[..k], up[k]) - oracle_log_likelihood(ds, &down[..k], down[k])) / (2.0 * h)
        })
        .collect()
}

pub struct FitCheck {
    pub fitted_ll: f64,
    pub oracle_ll: f64,
    pub gradient_max_norm: f64,
    /// Largest gradient/finite-difference mismatch, relative to the larger of
    /// the two magnitudes (floored at 1).
    pub fd_mismatch: f64,
}

impl FitCheck {
    pub fn passes(&self) -> bool {
        (self.fitted_ll - self.oracle_ll).abs() <= 1e-6 && self.gradient_max_norm <= 1e-5 && self.fd_mismatch <= 1e-4
    }
}

pub fn check_fit(ds: &Dataset) -> FitCheck {
    let options = FitOptions {
        ridge: ds.ridge,
        ..FitOptions::default()
    };
    let fit = fit_logistic(&ds.rows, &ds.labels, &options, ds.variant()).expect("tiny dataset fits");
    let w = fit.model.coefficients();
    let b = fit.model.intercept();
    let gradient = penalized_gradient(&ds.rows, &ds.labels, w, b, ds.ridge);
    let (oracle_ll, _) = grid_oracle(ds);

    // Compare analytic and numerical gradients away from the optimum too,
    // where they are not both near zero.
    let mut fd_mismatch: f64 = 0.0;
    let mut probe: Vec<f64> = w.iter().copied().chain([b]).collect();
    for shift in [0.0, 0.3, -0.7] {
        probe.iter_mut().for_each(|t| *t += shift);
        let k = probe.len() - 1;
        let analytic = penalized_gradient(&ds.rows, &ds.labels, &probe[..k], probe[k], ds.ridge);
        let numeric = finite_difference_gradient(ds, &probe);
        for (a, n) in analytic.iter().zip(&numeric) {
            fd_mismatch = fd_mismatch.max((a - n).abs() / a.abs().max(n.abs()).max(1.0));
        }
    }
    FitCheck {
        fitted_ll: oracle_log_likelihood(ds, w, b),
        oracle_ll,
        gradient_max_norm: gradient.iter().fold(0.0, |m, g| m.max(g.abs())),
        fd_mismatch,
    }
}
