//! Weighted least-squares estimation of coherence and field parameters.
//!
//! Both fits minimise `χ² = Σ [(model_i - y_i)/σ_i]²` with a
//! Levenberg-Marquardt solver and analytic Jacobians. Reported
//! uncertainties are the square roots of the diagonal of
//! `(JᵀJ)⁻¹ · χ²/(n - k)` at the optimum.
//!
//! Parameter names and units in [`FitResult`]:
//!
//! | model        | names                  | units            |
//! |--------------|------------------------|------------------|
//! | decoherence  | `r`, `t2`, `p`         | -, s, -          |
//! | field        | `b_ac`, `phi_ac`       | T, rad           |

mod lm;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SweepDataset;
use crate::error::{Error, Result};
use crate::field_phase::{AcField, NvParams};
use crate::filter::filter_fourier_closed;
use crate::math::{parity_sign, wrap_phase};
use crate::sequence::PulseSequence;
use crate::signal::{contrast, decay};

pub use lm::{FitOptions, IterationRecord};
use lm::{minimize, Problem, Solution};

/// Which signal model a [`FitResult`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Decoherence,
    AcField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    /// Parameter order of `covariance`.
    pub param_names: Vec<String>,
    pub params: BTreeMap<String, f64>,
    pub sigmas: BTreeMap<String, f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
    pub iteration_log: Vec<IterationRecord>,
}

impl FitResult {
    /// Estimate of `name`. Panics on an unknown name.
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.sigmas[name]
    }

    fn build(model: FitModel, names: &[&str], values: &[f64], sol: &Solution, n_points: usize) -> Option<Self> {
        let k = names.len();
        let dof = n_points - k;
        let chi2_reduced = sol.chi2 / dof as f64;
        let inv = sol.normal.clone().cholesky()?.inverse();
        let mut covariance = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                covariance[i][j] = 0.5 * (inv[(i, j)] + inv[(j, i)]) * chi2_reduced;
            }
        }
        if covariance.iter().flatten().any(|c| !c.is_finite()) {
            return None;
        }
        let params = names.iter().zip(values).map(|(n, v)| (n.to_string(), *v)).collect();
        let sigmas = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), covariance[i][i].max(0.0).sqrt()))
            .collect();
        Some(FitResult {
            model,
            param_names: names.iter().map(|n| n.to_string()).collect(),
            params,
            sigmas,
            covariance,
            chi2: sol.chi2,
            chi2_reduced,
            dof,
            iterations: sol.iterations,
            converged: sol.converged,
            iteration_log: sol.log.clone(),
        })
    }
}

/// Starting values for [`fit_decoherence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceGuess {
    pub r: f64,
    /// Seconds.
    pub t2: f64,
    pub p: f64,
}

/// Minimum number of points for a coherence fit.
pub const MIN_DECOHERENCE_POINTS: usize = 10;

/// Fit `(-1)^{n_x+1} (1-r)/(1+r) exp[-(Nτ/T2)^p]` to an in-phase sweep.
///
/// The data must cover `Nτ ∈ [0.2 T2, 2 T2]` for the fitted `T2`, otherwise
/// `DegenerateData` is returned.
pub fn fit_decoherence(dataset: &SweepDataset, template: &PulseSequence, initial: DecoherenceGuess) -> Result<FitResult> {
    fit_decoherence_with(dataset, template, initial, &FitOptions::default())
}

pub fn fit_decoherence_with(
    dataset: &SweepDataset,
    template: &PulseSequence,
    initial: DecoherenceGuess,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_points(dataset, MIN_DECOHERENCE_POINTS)?;
    let n = template.n_pulses() as f64;
    let problem = DecoherenceProblem {
        n_tau: dataset.points.iter().map(|p| n * p.tau).collect(),
        y: dataset.values(),
        sigma: dataset.points.iter().map(|p| p.sigma).collect(),
        sign: parity_sign(template.n_x() + 1),
    };
    let start = [initial.r, initial.t2, initial.p];
    if problem.residuals(&start).is_none() {
        return Err(Error::InvalidParameter(format!(
            "initial guess outside the model domain: {initial:?}"
        )));
    }
    let scales = [1.0, initial.t2.abs(), 1.0];
    let sol = minimize(&problem, &start, &scales, opts).expect("start checked above");
    if !sol.converged {
        return Err(Error::NonConvergence { iterations: sol.iterations });
    }
    let t2 = sol.params[1];
    let lo = problem.n_tau.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = problem.n_tau.iter().cloned().fold(0.0, f64::max);
    if lo > 0.2 * t2 || hi < 2.0 * t2 {
        return Err(Error::DegenerateData(format!(
            "Nτ spans [{lo:e}, {hi:e}] s, which does not cover [0.2, 2]·T2 = [{:e}, {:e}] s",
            0.2 * t2,
            2.0 * t2
        )));
    }
    FitResult::build(FitModel::Decoherence, &["r", "t2", "p"], &sol.params, &sol, problem.y.len())
        .ok_or_else(|| Error::DegenerateData("singular normal matrix at the optimum".into()))
}

/// Starting values for [`fit_ac_field`]. `f_ac` is held fixed; `phi_ac` is
/// used as given, without wrapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldGuess {
    /// Tesla; zero selects [`estimate_field_amplitude`].
    pub b_ac: f64,
    /// Radians.
    pub phi_ac: f64,
    /// Hertz.
    pub f_ac: f64,
}

impl From<&AcField> for FieldGuess {
    fn from(f: &AcField) -> Self {
        FieldGuess {
            b_ac: f.b_ac(),
            phi_ac: f.phi_ac(),
            f_ac: f.f_ac(),
        }
    }
}

/// Fit `B_ac` and `φ_ac` to a quadrature sweep with `f_ac`, the coherence
/// constants and the sequence held fixed.
///
/// Starts are spread evenly in
/// `φ_ac` from the given phase; the lowest-χ² optimum wins, ties going to the
/// lower phase. The returned phase is wrapped to (-π, π] and `B_ac ≥ 0`.
pub fn fit_ac_field(dataset: &SweepDataset, template: &PulseSequence, nv: &NvParams, initial: FieldGuess) -> Result<FitResult> {
    fit_ac_field_with(dataset, template, nv, initial, &FitOptions::default())
}

pub fn fit_ac_field_with(
    dataset: &SweepDataset,
    template: &PulseSequence,
    nv: &NvParams,
    initial: FieldGuess,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_points(dataset, 3)?;
    nv.validate()?;
    let problem = AcFieldProblem::new(dataset, template, nv, initial.f_ac)?;
    let b0 = if initial.b_ac > 0.0 {
        initial.b_ac
    } else {
        problem.amplitude_guess()
    };
    let starts = opts.phase_starts.max(1);
    let solutions: Vec<Option<Solution>> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let phi = initial.phi_ac + 2.0 * PI * k as f64 / starts as f64;
            minimize(&problem, &[b0, phi], &[b0, 1.0], opts)
        })
        .collect();

    let mut best: Option<(f64, f64, Solution, bool)> = None;
    let mut max_iterations = 0;
    for sol in solutions.into_iter().flatten() {
        max_iterations = max_iterations.max(sol.iterations);
        if !sol.converged {
            continue;
        }
        let flipped = sol.params[0] < 0.0;
        let phi = wrap_phase(sol.params[1] + if flipped { PI } else { 0.0 });
        let better = match &best {
            None => true,
            Some((chi2, best_phi, _, _)) => {
                let tie = (sol.chi2 - chi2).abs() <= 1e-9 * (1.0 + chi2);
                if tie {
                    phi < *best_phi
                } else {
                    sol.chi2 < *chi2
                }
            }
        };
        if better {
            best = Some((sol.chi2, phi, sol, flipped));
        }
    }
    let (_, phi, sol, flipped) = best.ok_or(Error::NonConvergence { iterations: max_iterations })?;
    let b = sol.params[0].abs();
    let mut result = FitResult::build(FitModel::AcField, &["b_ac", "phi_ac"], &[b, phi], &sol, problem.y.len())
        .ok_or(Error::AmbiguousPhase { b_ac: b, sigma_phi: f64::INFINITY })?;
    if flipped {
        result.covariance[0][1] = -result.covariance[0][1];
        result.covariance[1][0] = -result.covariance[1][0];
    }
    let sigma_phi = result.sigma("phi_ac");
    if sigma_phi.is_nan() || sigma_phi >= 1.0 {
        return Err(Error::AmbiguousPhase { b_ac: b, sigma_phi });
    }
    Ok(result)
}

/// A starting amplitude for a field fit: the `B_ac` whose largest phase over
/// the sweep equals `asin` of the largest normalized signal.
pub fn estimate_field_amplitude(dataset: &SweepDataset, template: &PulseSequence, nv: &NvParams, f_ac: f64) -> Result<f64> {
    check_points(dataset, 1)?;
    Ok(AcFieldProblem::new(dataset, template, nv, f_ac)?.amplitude_guess())
}

/// Rough starting values for [`fit_decoherence`]: `r` from the first point's
/// magnitude, `T2` where `|value|` first falls below `1/e` of it, `p = 1`.
pub fn estimate_decoherence_guess(dataset: &SweepDataset, template: &PulseSequence) -> Result<DecoherenceGuess> {
    check_points(dataset, 2)?;
    let n = template.n_pulses() as f64;
    let first = dataset.points[0].value.abs().clamp(1e-6, 0.99);
    let r = (1.0 - first) / (1.0 + first);
    let last_tau = dataset.points.iter().map(|p| p.tau).fold(0.0, f64::max);
    let t2 = dataset
        .points
        .iter()
        .find(|p| p.value.abs() < first / std::f64::consts::E)
        .map_or(0.5 * n * last_tau, |p| n * p.tau);
    Ok(DecoherenceGuess { r, t2, p: 1.0 })
}

fn check_points(dataset: &SweepDataset, min_points: usize) -> Result<()> {
    let pts = &dataset.points;
    if pts.len() < min_points {
        return Err(Error::DegenerateData(format!(
            "{} points, at least {min_points} needed",
            pts.len()
        )));
    }
    if let Some((i, p)) = pts
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.sigma.is_finite() && p.sigma > 0.0) || !p.value.is_finite())
    {
        return Err(Error::DegenerateData(format!(
            "point {i} has value {} and sigma {}",
            p.value, p.sigma
        )));
    }
    if let Some(p) = pts.iter().find(|p| !(p.tau.is_finite() && p.tau > 0.0)) {
        return Err(Error::InvalidGrid(format!("τ = {:e} s is not positive", p.tau)));
    }
    if pts.iter().all(|p| p.tau == pts[0].tau) {
        return Err(Error::DegenerateData("all τ values are equal".into()));
    }
    Ok(())
}

struct DecoherenceProblem {
    n_tau: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    sign: f64,
}

impl DecoherenceProblem {
    fn valid(p: &[f64]) -> bool {
        (0.0..1.0).contains(&p[0]) && p[1] > 0.0 && p[2] > 0.0 && p.iter().all(|v| v.is_finite())
    }
}

impl Problem for DecoherenceProblem {
    fn n_params(&self) -> usize {
        3
    }

    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        if !Self::valid(p) {
            return None;
        }
        let c = self.sign * contrast(p[0]);
        Some(DVector::from_iterator(
            self.y.len(),
            (0..self.y.len()).map(|i| {
                let model = c * (-(self.n_tau[i] / p[1]).powf(p[2])).exp();
                (model - self.y[i]) / self.sigma[i]
            }),
        ))
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let (r, t2, q) = (p[0], p[1], p[2]);
        let c = self.sign * contrast(r);
        let dc = -2.0 * self.sign / ((1.0 + r) * (1.0 + r));
        let mut j = DMatrix::zeros(self.y.len(), 3);
        for i in 0..self.y.len() {
            let x = self.n_tau[i] / t2;
            let xq = x.powf(q);
            let e = (-xq).exp();
            let w = 1.0 / self.sigma[i];
            j[(i, 0)] = w * dc * e;
            j[(i, 1)] = w * c * e * q * xq / t2;
            j[(i, 2)] = -w * c * e * xq * x.ln();
        }
        j
    }
}

/// Per-point constants of the quadrature model `A_i sin[γB (cos φ F_re + sin φ F_im)]`.
struct AcFieldProblem {
    amp: Vec<f64>,
    f_re: Vec<f64>,
    f_im: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    gamma: f64,
}

impl AcFieldProblem {
    fn new(dataset: &SweepDataset, template: &PulseSequence, nv: &NvParams, f_ac: f64) -> Result<Self> {
        if !(f_ac.is_finite() && f_ac > 0.0) {
            return Err(Error::InvalidParameter(format!("field frequency must be > 0, got {f_ac}")));
        }
        let nv = nv.paired_with(template);
        let omega = 2.0 * PI * f_ac;
        let sign = parity_sign(nv.n_y + 1) * contrast(nv.r);
        let n = dataset.points.len();
        let (mut amp, mut f_re, mut f_im) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for p in &dataset.points {
            let seq = template.with_tau(p.tau)?;
            let f = filter_fourier_closed(&seq, omega)?;
            amp.push(sign * decay(&seq, &nv));
            f_re.push(f.re);
            f_im.push(f.im);
        }
        Ok(AcFieldProblem {
            amp,
            f_re,
            f_im,
            y: dataset.values(),
            sigma: dataset.points.iter().map(|p| p.sigma).collect(),
            gamma: nv.gamma(),
        })
    }

    fn amplitude_guess(&self) -> f64 {
        let ratio = (0..self.y.len())
            .filter(|&i| self.amp[i] != 0.0)
            .map(|i| (self.y[i] / self.amp[i]).abs())
            .fold(0.0, f64::max)
            .min(1.0);
        let f_max = (0..self.y.len())
            .map(|i| self.f_re[i].hypot(self.f_im[i]))
            .fold(0.0, f64::max);
        let phase = ratio.asin().max(1e-3);
        if f_max > 0.0 {
            phase / (self.gamma * f_max)
        } else {
            1e-9
        }
    }

    fn phase(&self, i: usize, b: f64, cos: f64, sin: f64) -> f64 {
        self.gamma * b * (cos * self.f_re[i] + sin * self.f_im[i])
    }
}

impl Problem for AcFieldProblem {
    fn n_params(&self) -> usize {
        2
    }

    fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return None;
        }
        let (sin, cos) = p[1].sin_cos();
        Some(DVector::from_iterator(
            self.y.len(),
            (0..self.y.len()).map(|i| (self.amp[i] * self.phase(i, p[0], cos, sin).sin() - self.y[i]) / self.sigma[i]),
        ))
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let b = p[0];
        let (sin, cos) = p[1].sin_cos();
        let mut j = DMatrix::zeros(self.y.len(), 2);
        for i in 0..self.y.len() {
            let d = self.amp[i] * self.phase(i, b, cos, sin).cos() / self.sigma[i];
            j[(i, 0)] = d * self.gamma * (cos * self.f_re[i] + sin * self.f_im[i]);
            j[(i, 1)] = d * self.gamma * b * (cos * self.f_im[i] - sin * self.f_re[i]);
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SweepPoint;
    use crate::sequence::{build_sequence, SequenceKind};
    use crate::signal::{linear_grid, synthesize_dataset, PhotonBudget};

    const US: f64 = 1e-6;
    const NS: f64 = 1e-9;

    fn hahn_setup() -> (PulseSequence, AcField, NvParams) {
        let seq = build_sequence(SequenceKind::HahnEcho, 1, 1.0 * US, 124.0 * NS).unwrap();
        let field = AcField::new(2.75e-6, 500e3, 91.4_f64.to_radians()).unwrap();
        let nv = NvParams::for_sequence(&seq, 0.895, 74.0 * US, 0.952).unwrap();
        (seq, field, nv)
    }

    fn xy8_setup() -> (PulseSequence, AcField, NvParams) {
        let seq = build_sequence(SequenceKind::Xy8, 40, 2.374 * US, 126.0 * NS).unwrap();
        let field = AcField::new(45.6e-9, 200e3, 181.2_f64.to_radians()).unwrap();
        let nv = NvParams::for_sequence(&seq, 0.895, 300.0 * US, 1.0).unwrap();
        (seq, field, nv)
    }

    fn max_rel_jacobian_error<P: Problem>(problem: &P, p: &[f64]) -> f64 {
        let j = problem.jacobian(p);
        let mut worst: f64 = 0.0;
        for k in 0..p.len() {
            let h = 1e-5 * p[k].abs().max(1e-3 * p[k].abs() + f64::MIN_POSITIVE);
            let (mut up, mut dn) = (p.to_vec(), p.to_vec());
            up[k] += h;
            dn[k] -= h;
            let fd = (problem.residuals(&up).unwrap() - problem.residuals(&dn).unwrap()) / (2.0 * h);
            let col = j.column(k);
            let scale = col.amax().max(f64::MIN_POSITIVE);
            worst = worst.max((fd - col).amax() / scale);
        }
        worst
    }

    #[test]
    fn decoherence_jacobian_matches_finite_differences() {
        let (seq, _, nv) = hahn_setup();
        let grid = linear_grid(5.0 * US, 150.0 * US, 40).unwrap();
        let ds = synthesize_dataset(&seq, None, &nv, &grid, PhotonBudget::Finite(1e5), 1).unwrap();
        let problem = DecoherenceProblem {
            n_tau: grid.clone(),
            y: ds.values(),
            sigma: ds.points.iter().map(|p| p.sigma).collect(),
            sign: -1.0,
        };
        let err = max_rel_jacobian_error(&problem, &[0.9, 70.0 * US, 1.05]);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn field_jacobian_matches_finite_differences() {
        for (seq, field, nv) in [hahn_setup(), xy8_setup()] {
            let grid = linear_grid(0.5 * US, 9.0 * US, 60).unwrap();
            let ds = synthesize_dataset(&seq, Some(&field), &nv, &grid, PhotonBudget::noiseless(), 0).unwrap();
            let problem = AcFieldProblem::new(&ds, &seq, &nv, field.f_ac()).unwrap();
            let err = max_rel_jacobian_error(&problem, &[field.b_ac() * 1.1, field.phi_ac() - 0.2]);
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn noiseless_decoherence_recovery() {
        let (seq, _, nv) = hahn_setup();
        let grid = linear_grid(2.0 * US, 200.0 * US, 60).unwrap();
        let ds = synthesize_dataset(&seq, None, &nv, &grid, PhotonBudget::noiseless(), 0).unwrap();
        let guess = DecoherenceGuess { r: 0.85, t2: 50.0 * US, p: 1.3 };
        let fit = fit_decoherence(&ds, &seq, guess).unwrap();
        assert!(fit.converged);
        for (name, truth) in [("r", 0.895), ("t2", 74.0 * US), ("p", 0.952)] {
            let rel = (fit.param(name) - truth).abs() / truth;
            assert!(rel < 1e-6, "{name}: {} vs {truth}", fit.param(name));
        }
    }

    #[test]
    fn heuristic_guess_is_close_enough_to_converge() {
        let (seq, _, nv) = hahn_setup();
        let grid = linear_grid(2.0 * US, 200.0 * US, 60).unwrap();
        let ds = synthesize_dataset(&seq, None, &nv, &grid, PhotonBudget::Finite(1e5), 9).unwrap();
        let guess = estimate_decoherence_guess(&ds, &seq).unwrap();
        assert!(guess.t2 > 40.0 * US && guess.t2 < 120.0 * US, "{guess:?}");
        let fit = fit_decoherence(&ds, &seq, guess).unwrap();
        assert!((fit.param("t2") - 74.0 * US).abs() < 4.0 * fit.sigma("t2"));
    }

    #[test]
    fn cpmg2_decoherence_recovery() {
        let seq = build_sequence(SequenceKind::Cpmg, 2, 1.0 * US, 0.0).unwrap();
        let nv = NvParams::for_sequence(&seq, 0.892, 94.7 * US, 1.11).unwrap();
        let grid = linear_grid(2.0 * US, 120.0 * US, 50).unwrap();
        let ds = synthesize_dataset(&seq, None, &nv, &grid, PhotonBudget::noiseless(), 0).unwrap();
        let fit = fit_decoherence(&ds, &seq, DecoherenceGuess { r: 0.8, t2: 60.0 * US, p: 1.0 }).unwrap();
        assert!((fit.param("t2") / (94.7 * US) - 1.0).abs() < 1e-6);
        assert!((fit.param("p") / 1.11 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noiseless_field_recovery_hahn_and_xy8() {
        let cases = [
            (hahn_setup(), linear_grid(0.5 * US, 9.0 * US, 200).unwrap()),
            (xy8_setup(), linear_grid(2.0 * US, 3.0 * US, 200).unwrap()),
        ];
        for ((seq, field, nv), grid) in cases {
            let ds = synthesize_dataset(&seq, Some(&field), &nv, &grid, PhotonBudget::noiseless(), 0).unwrap();
            let start = FieldGuess { b_ac: field.b_ac() * 0.7, phi_ac: 0.0, f_ac: field.f_ac() };
            let fit = fit_ac_field(&ds, &seq, &nv, start).unwrap();
            assert!((fit.param("b_ac") / field.b_ac() - 1.0).abs() < 1e-8, "{fit:?}");
            assert!(wrap_phase(fit.param("phi_ac") - field.phi_ac()).abs() < 1e-8);
            assert!(fit.param("phi_ac") > -PI && fit.param("phi_ac") <= PI);
        }
    }

    #[test]
    fn zero_amplitude_start_uses_heuristic() {
        let (seq, field, nv) = hahn_setup();
        let grid = linear_grid(0.5 * US, 9.0 * US, 100).unwrap();
        let ds = synthesize_dataset(&seq, Some(&field), &nv, &grid, PhotonBudget::Finite(1e5), 3).unwrap();
        let b0 = estimate_field_amplitude(&ds, &seq, &nv, field.f_ac()).unwrap();
        assert!(b0 > 0.2 * field.b_ac() && b0 < 5.0 * field.b_ac(), "{b0}");
        let start = FieldGuess { b_ac: 0.0, phi_ac: 0.0, f_ac: field.f_ac() };
        let fit = fit_ac_field(&ds, &seq, &nv, start).unwrap();
        assert!((fit.param("b_ac") - field.b_ac()).abs() < 4.0 * fit.sigma("b_ac"));
    }

    #[test]
    fn phase_start_offset_by_full_turn_is_congruent() {
        let (seq, field, nv) = hahn_setup();
        let grid = linear_grid(0.5 * US, 9.0 * US, 200).unwrap();
        let ds = synthesize_dataset(&seq, Some(&field), &nv, &grid, PhotonBudget::Finite(1e5), 11).unwrap();
        let a = fit_ac_field(&ds, &seq, &nv, (&field).into()).unwrap();
        let start = FieldGuess { phi_ac: field.phi_ac() + 2.0 * PI, ..FieldGuess::from(&field) };
        let b = fit_ac_field(&ds, &seq, &nv, start).unwrap();
        let diff = wrap_phase(b.param("phi_ac") - field.phi_ac());
        assert!(diff.abs() < 3.0 * b.sigma("phi_ac"));
        assert!((a.param("phi_ac") - b.param("phi_ac")).abs() < 1e-8);
    }

    #[test]
    fn zero_field_is_ambiguous_or_consistent_with_zero() {
        let (seq, field, nv) = hahn_setup();
        let zero = field.with_b_ac(0.0).unwrap();
        let grid = linear_grid(0.5 * US, 9.0 * US, 200).unwrap();
        for seed in 0..5 {
            let ds = synthesize_dataset(&seq, Some(&zero), &nv, &grid, PhotonBudget::Finite(1e5), seed).unwrap();
            match fit_ac_field(&ds, &seq, &nv, (&field).into()) {
                Err(Error::AmbiguousPhase { .. }) => {}
                Ok(fit) => assert!(fit.param("b_ac") < 2.0 * fit.sigma("b_ac"), "{fit:?}"),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let (seq, field, nv) = hahn_setup();
        let flat = SweepDataset {
            points: vec![SweepPoint { tau: 1e-6, value: -0.05, sigma: 1e-3 }; 12],
            meta: None,
        };
        let guess = DecoherenceGuess { r: 0.9, t2: 50e-6, p: 1.0 };
        assert!(matches!(fit_decoherence(&flat, &seq, guess), Err(Error::DegenerateData(_))));
        assert!(matches!(fit_ac_field(&flat, &seq, &nv, (&field).into()), Err(Error::DegenerateData(_))));

        let grid = linear_grid(2.0 * US, 200.0 * US, 30).unwrap();
        let mut ds = synthesize_dataset(&seq, None, &nv, &grid, PhotonBudget::noiseless(), 0).unwrap();
        ds.points[4].sigma = 0.0;
        assert!(matches!(fit_decoherence(&ds, &seq, guess), Err(Error::DegenerateData(_))));
        ds.points.truncate(4);
        assert!(matches!(fit_decoherence(&ds, &seq, guess), Err(Error::DegenerateData(_))));

        // Only the early decay: the fitted T2 is not bracketed by the data.
        let short = linear_grid(1.0 * US, 20.0 * US, 30).unwrap();
        let ds = synthesize_dataset(&seq, None, &nv, &short, PhotonBudget::noiseless(), 0).unwrap();
        assert!(matches!(fit_decoherence(&ds, &seq, guess), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn iteration_cap_yields_nonconvergence() {
        let (seq, _, nv) = hahn_setup();
        let grid = linear_grid(2.0 * US, 200.0 * US, 60).unwrap();
        let ds = synthesize_dataset(&seq, None, &nv, &grid, PhotonBudget::noiseless(), 0).unwrap();
        let opts = FitOptions { max_iterations: 1, ..FitOptions::default() };
        let guess = DecoherenceGuess { r: 0.5, t2: 20.0 * US, p: 2.0 };
        let r = fit_decoherence_with(&ds, &seq, guess, &opts);
        assert!(matches!(r, Err(Error::NonConvergence { iterations: 1 })));
    }

    #[test]
    fn covariance_is_symmetric_psd_and_matches_sigmas() {
        let (seq, field, nv) = hahn_setup();
        let grid = linear_grid(0.5 * US, 9.0 * US, 200).unwrap();
        let ds = synthesize_dataset(&seq, Some(&field), &nv, &grid, PhotonBudget::Finite(1e5), 5).unwrap();
        let fit = fit_ac_field(&ds, &seq, &nv, (&field).into()).unwrap();
        let c = &fit.covariance;
        assert_eq!(c[0][1], c[1][0]);
        assert!(c[0][0] > 0.0 && c[0][0] * c[1][1] - c[0][1] * c[1][0] >= 0.0);
        assert_eq!(fit.sigma("b_ac"), c[0][0].sqrt());
        let json = serde_json::to_string(&fit).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fit);
    }
}
