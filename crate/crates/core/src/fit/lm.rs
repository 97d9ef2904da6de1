//! Levenberg-Marquardt on weighted residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A least-squares problem in weighted-residual form `r_i(p) = (f_i(p) - y_i)/σ_i`.
pub(crate) trait Problem {
    fn n_params(&self) -> usize;
    /// `None` when `p` is outside the model's domain.
    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>>;
    /// `∂r_i/∂p_j`.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when every step component is below `xtol (|p_j| + scale_j)`.
    pub xtol: f64,
    /// Converged when `max_j |g_j| (|p_j| + scale_j) / (1 + χ²)` falls below this.
    pub gtol: f64,
    /// Number of evenly spaced starting phases for field fits.
    pub phase_starts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            xtol: 1e-10,
            gtol: 1e-12,
            phase_starts: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub chi2: f64,
    pub lambda: f64,
    pub accepted: bool,
}

pub(crate) struct Solution {
    pub params: Vec<f64>,
    pub chi2: f64,
    /// `JᵀJ` at the solution.
    pub normal: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<IterationRecord>,
}

pub(crate) fn minimize<P: Problem>(problem: &P, start: &[f64], scales: &[f64], opts: &FitOptions) -> Option<Solution> {
    let k = problem.n_params();
    let mut p = start.to_vec();
    let mut r = problem.residuals(&p)?;
    let mut chi2 = r.norm_squared();
    let mut j = problem.jacobian(&p);
    let mut a = j.transpose() * &j;
    let mut g = j.transpose() * &r;
    let mut diag: Vec<f64> = (0..k).map(|i| a[(i, i)].max(f64::MIN_POSITIVE)).collect();
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut log = Vec::new();
    let reference = |p: &[f64], i: usize| p[i].abs() + scales[i];

    let grad_small = |g: &DVector<f64>, p: &[f64], chi2: f64| {
        (0..k).all(|i| (g[i] * reference(p, i)).abs() / (1.0 + chi2) < opts.gtol)
    };
    if grad_small(&g, &p, chi2) {
        return Some(Solution { params: p, chi2, normal: a, iterations: 0, converged: true, log });
    }

    for iteration in 1..=opts.max_iterations {
        let mut m = a.clone();
        for i in 0..k {
            m[(i, i)] += lambda * diag[i];
        }
        let step = match m.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                lambda *= nu;
                nu *= 2.0;
                log.push(IterationRecord { iteration, chi2, lambda, accepted: false });
                continue;
            }
        };
        let small_step = (0..k).all(|i| step[i].abs() < opts.xtol * reference(&p, i));
        let trial: Vec<f64> = (0..k).map(|i| p[i] + step[i]).collect();
        let trial_r = problem.residuals(&trial);
        let trial_chi2 = trial_r.as_ref().map_or(f64::INFINITY, |r| r.norm_squared());
        let predicted: f64 = (0..k).map(|i| step[i] * (lambda * diag[i] * step[i] - g[i])).sum();
        let rho = if predicted > 0.0 { (chi2 - trial_chi2) / predicted } else { -1.0 };

        // A tiny step only signals convergence if it is close to a Gauss-Newton
        // step, or if χ² can no longer change at working precision.
        let stalled = (chi2 - trial_chi2).abs() <= 1e-12 * (1.0 + chi2);
        let small_step = small_step && (lambda <= 1e2 || stalled);
        let accepted = trial_chi2.is_finite() && (rho > 0.0 || trial_chi2 <= chi2 && small_step);
        if accepted {
            p = trial;
            r = trial_r.expect("finite χ² implies residuals");
            chi2 = trial_chi2;
            j = problem.jacobian(&p);
            a = j.transpose() * &j;
            g = j.transpose() * &r;
            for i in 0..k {
                diag[i] = diag[i].max(a[(i, i)]);
            }
            lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
        } else {
            lambda *= nu;
            nu *= 2.0;
        }
        log.push(IterationRecord { iteration, chi2, lambda, accepted });

        if small_step || grad_small(&g, &p, chi2) {
            return Some(Solution { params: p, chi2, normal: a, iterations: iteration, converged: true, log });
        }
        if !lambda.is_finite() {
            break;
        }
    }
    let iterations = log.len();
    Some(Solution { params: p, chi2, normal: a, iterations, converged: false, log })
}
