//! Finite-width filter functions in the time and frequency domains.
//!
//! `F(t)` is +1/-1 on free precession and 0 inside pulse windows. Its Fourier
//! transform `F(ω) = ∫ F(t) e^{-iωt} dt` has units of seconds.
//!
//! Routes:
//!
//! | function | valid for | notes |
//! |---|---|---|
//! | [`filter_fourier_exact`] | any N | segment sum, exact to roundoff |
//! | [`filter_fourier_pulse_sum`] | any N | sum over pulse edges |
//! | [`filter_fourier_hahn`] | N = 1 | closed form |
//! | [`filter_fourier_cp`] | even N | closed form, guard band around its removable singularity |
//! | [`filter_fourier_approx_cp`] | even N | `cos(ωτπ/2) ≈ 1` magnitude |
//!
//! Odd N > 1 has no dedicated closed form; [`filter_fourier`] serves it with
//! the pulse-edge sum under [`FilterMethod::Analytic`].

use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sinc;
use crate::sequence::PulseSequence;

/// Half-width of the band `|cos(ω(τ+τπ)/2)| < guard` in which the CP closed
/// form is replaced by the exact segment sum.
pub const DEFAULT_GUARD_BAND: f64 = 1e-6;

/// One point of a sampled filter function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSample {
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// F(ω), seconds.
    pub value: Complex64,
}

/// Time-domain filter value at `t`: `(-1)^{j-1}` before pulse j, `(-1)^j`
/// after it, 0 inside a pulse window or outside `[0, T)`.
///
/// Intervals are half-open: a free segment includes its start and excludes
/// its end.
pub fn filter_time(seq: &PulseSequence, t: f64) -> i8 {
    if !(t >= 0.0 && t < seq.total_time()) {
        return 0;
    }
    let segments = seq.free_segments();
    // Last segment starting at or before t.
    let idx = segments.partition_point(|s| s.start <= t);
    if idx == 0 {
        return 0;
    }
    let seg = &segments[idx - 1];
    if t < seg.end {
        seg.sign as i8
    } else {
        0
    }
}

/// Exact Fourier transform by summing closed-form integrals of each constant
/// segment of `F(t)`.
///
/// Each segment `[a, b]` with sign `s` contributes
/// `s (b - a) sinc(ω(b - a)/2) e^{-iω(a + b)/2}`, which equals
/// `s (e^{-iωa} - e^{-iωb}) / (iω)` and tends to `s (b - a)` at ω = 0.
pub fn filter_fourier_exact(seq: &PulseSequence, omega: f64) -> Complex64 {
    if omega == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    seq.free_segments()
        .iter()
        .map(|s| {
            let len = s.end - s.start;
            let mid = 0.5 * (s.start + s.end);
            let amp = s.sign * len * sinc(0.5 * omega * len);
            Complex64::from_polar(amp, -omega * mid)
        })
        .sum()
}

/// Fourier transform written as a sum over pulse edges, valid for every N:
///
/// `F(ω) = [1 + (-1)^{N+1} e^{-iωT} + 2 Σ_j (-1)^j e^{-iω c_j T/N} cos(ωτπ/2)] / (iω)`.
///
/// Loses relative accuracy as ω → 0 (the bracket cancels); returns 0 at ω = 0.
pub fn filter_fourier_pulse_sum(seq: &PulseSequence, omega: f64) -> Complex64 {
    if omega == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let n = seq.n_pulses();
    let edge = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
    let mut bracket = Complex64::new(1.0, 0.0)
        + edge * Complex64::from_polar(1.0, -omega * seq.total_time());
    let width_factor = 2.0 * (0.5 * omega * seq.tau_pi()).cos();
    for j in 1..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        bracket += Complex64::from_polar(sign * width_factor, -omega * seq.pulse_center(j));
    }
    bracket / Complex64::new(0.0, omega)
}

/// Closed form for the Hahn echo (N = 1):
///
/// `F(ω) = (4i/ω) e^{-iωτ(1+α)/2} sin(ωτ/4) sin(ωτ(1+2α)/4)`.
pub fn filter_fourier_hahn(seq: &PulseSequence, omega: f64) -> Result<Complex64> {
    if seq.n_pulses() != 1 {
        return Err(wrong_kind(seq, "filter_fourier_hahn", "N = 1"));
    }
    if omega == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let tau = seq.tau();
    let alpha = seq.alpha();
    let mag = 4.0 / omega
        * (omega * tau / 4.0).sin()
        * (omega * tau * (1.0 + 2.0 * alpha) / 4.0).sin();
    let phase = -omega * tau * (1.0 + alpha) / 2.0;
    Ok(Complex64::new(0.0, 1.0) * Complex64::from_polar(mag, phase))
}

/// Closed form for CP-type blocks (even N), with the default guard band.
pub fn filter_fourier_cp(seq: &PulseSequence, omega: f64) -> Result<Complex64> {
    filter_fourier_cp_guarded(seq, omega, DEFAULT_GUARD_BAND)
}

/// Closed form for CP-type blocks (even N):
///
/// `F(ω) = NP e^{-iωNP/2} {1 - cos(αωτ/2)/cos(ωP/2)} sinc(ωNP/2)`, `P = τ(1+α)`.
///
/// Where `|cos(ωP/2)| < guard` the braces diverge while the sinc vanishes;
/// those points are evaluated by [`filter_fourier_exact`].
pub fn filter_fourier_cp_guarded(seq: &PulseSequence, omega: f64, guard: f64) -> Result<Complex64> {
    let n = seq.n_pulses();
    if !n.is_multiple_of(2) {
        return Err(wrong_kind(seq, "filter_fourier_cp", "an even number of pulses"));
    }
    if omega == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let big_t = seq.total_time();
    let half_period_phase = omega * seq.period() / 2.0;
    let denom = half_period_phase.cos();
    if denom.abs() < guard {
        return Ok(filter_fourier_exact(seq, omega));
    }
    let braces = 1.0 - (seq.alpha() * omega * seq.tau() / 2.0).cos() / denom;
    let mag = big_t * braces * sinc(omega * big_t / 2.0);
    Ok(Complex64::from_polar(mag, -omega * big_t / 2.0))
}

/// Magnitude of the CP filter with `cos(αωτ/2)` replaced by 1, together with
/// the size of the neglected argument `αωτ/2 = ωτπ/2` (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpApproximation {
    /// `NP |1 - sec(ωP/2)| |sinc(ωNP/2)|`, seconds.
    pub magnitude: f64,
    /// `αωτ/2`, radians.
    pub validity: f64,
}

pub fn filter_fourier_approx_cp(seq: &PulseSequence, omega: f64) -> Result<CpApproximation> {
    let n = seq.n_pulses();
    if !n.is_multiple_of(2) {
        return Err(wrong_kind(seq, "filter_fourier_approx_cp", "an even number of pulses"));
    }
    let validity = seq.alpha() * omega * seq.tau() / 2.0;
    if omega == 0.0 {
        return Ok(CpApproximation {
            magnitude: 0.0,
            validity,
        });
    }
    let big_t = seq.total_time();
    let x = omega * seq.period() / 2.0;
    let cos_x = x.cos();
    let magnitude = if cos_x.abs() < DEFAULT_GUARD_BAND {
        // sin(Nx)/cos(x) -> N cos(Nx)/(-sin x) at the pole.
        let n = n as f64;
        let ratio = n * (n * x).cos() / -x.sin();
        seq.period() * ((cos_x - 1.0) * ratio).abs() / x.abs()
    } else {
        big_t * (1.0 - 1.0 / cos_x).abs() * sinc(omega * big_t / 2.0).abs()
    };
    Ok(CpApproximation {
        magnitude,
        validity,
    })
}

/// Frequency-domain route selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMethod {
    /// Segment sum.
    Exact,
    /// Hahn closed form for N = 1, CP closed form for even N, pulse-edge sum otherwise.
    Analytic,
    /// `cos(αωτ/2) ≈ 1` magnitude (real, even N only).
    Approx,
}

impl FromStr for FilterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(FilterMethod::Exact),
            "analytic" => Ok(FilterMethod::Analytic),
            "approx" => Ok(FilterMethod::Approx),
            other => Err(Error::Config(format!("unknown filter method `{other}`"))),
        }
    }
}

/// F(ω) by the chosen route. `Approx` yields a real magnitude.
pub fn filter_fourier(seq: &PulseSequence, omega: f64, method: FilterMethod) -> Result<Complex64> {
    match method {
        FilterMethod::Exact => Ok(filter_fourier_exact(seq, omega)),
        FilterMethod::Analytic => filter_fourier_closed(seq, omega),
        FilterMethod::Approx => {
            filter_fourier_approx_cp(seq, omega).map(|a| Complex64::new(a.magnitude, 0.0))
        }
    }
}

/// Best available closed form for the sequence's N.
pub fn filter_fourier_closed(seq: &PulseSequence, omega: f64) -> Result<Complex64> {
    match seq.n_pulses() {
        1 => filter_fourier_hahn(seq, omega),
        n if n % 2 == 0 => filter_fourier_cp(seq, omega),
        _ => Ok(filter_fourier_pulse_sum(seq, omega)),
    }
}

/// Evaluate F(ω) on a grid, in parallel; output order follows `omegas`.
pub fn sample_filter(
    seq: &PulseSequence,
    omegas: &[f64],
    method: FilterMethod,
) -> Result<Vec<FilterSample>> {
    omegas
        .par_iter()
        .map(|&omega| {
            filter_fourier(seq, omega, method).map(|value| FilterSample { omega, value })
        })
        .collect()
}

fn wrong_kind(seq: &PulseSequence, operation: &'static str, expected: &'static str) -> Error {
    Error::WrongSequenceKind {
        operation,
        expected,
        kind: seq.kind(),
        n_pulses: seq.n_pulses(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{build_sequence, SequenceKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const US: f64 = 1e-6;
    const NS: f64 = 1e-9;

    fn hahn(tau: f64, tau_pi: f64) -> PulseSequence {
        build_sequence(SequenceKind::HahnEcho, 1, tau, tau_pi).unwrap()
    }

    /// Independent brute-force transform: composite Gauss-Legendre over each
    /// free segment with F(t) sampled from `filter_time`.
    fn quadrature_transform(seq: &PulseSequence, omega: f64) -> Complex64 {
        // 5-point Gauss-Legendre nodes and weights on [-1, 1].
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let mut acc = Complex64::new(0.0, 0.0);
        let total = seq.total_time();
        let panels = 4000;
        let h = total / panels as f64;
        // Panel edges do not line up with pulse edges; subdivide at them.
        let mut edges: Vec<f64> = (0..=panels).map(|k| k as f64 * h).collect();
        for w in seq.pulse_windows() {
            edges.push(w.start);
            edges.push(w.end);
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let f = filter_time(seq, mid) as f64;
            for (x, w) in X.iter().zip(W) {
                let t = mid + half * x;
                acc += w * half * f * Complex64::from_polar(1.0, -omega * t);
            }
        }
        acc
    }

    #[test]
    fn time_domain_branches() {
        let s = hahn(2.0 * US, 200.0 * NS);
        assert_eq!(filter_time(&s, 0.5 * US), 1);
        assert_eq!(filter_time(&s, 1.1 * US), 0);
        assert_eq!(filter_time(&s, 1.5 * US), -1);
        assert_eq!(filter_time(&s, -1e-9), 0);
        assert_eq!(filter_time(&s, s.total_time()), 0);
        // Half-open edges.
        assert_eq!(filter_time(&s, 0.0), 1);
        assert_eq!(filter_time(&s, 1.0 * US), 0);
        let w = s.pulse_windows()[0];
        assert_eq!(filter_time(&s, w.end), -1);
    }

    #[test]
    fn zero_width_switches_at_center() {
        let s = build_sequence(SequenceKind::Cp, 2, 1.0 * US, 0.0).unwrap();
        assert_eq!(filter_time(&s, 0.5 * US), -1);
        assert_eq!(filter_time(&s, 0.5 * US - 1e-15), 1);
        assert_eq!(filter_time(&s, 1.5 * US), 1);
    }

    #[test]
    fn exact_vanishes_at_dc() {
        let s = build_sequence(SequenceKind::Xy8, 16, 1.3 * US, 77.0 * NS).unwrap();
        assert_eq!(filter_fourier_exact(&s, 0.0), Complex64::new(0.0, 0.0));
        // Near DC the segment sum still cancels.
        assert!(filter_fourier_exact(&s, 1e-3).norm() < 1e-18);
    }

    #[test]
    fn exact_matches_quadrature() {
        for seq in [
            hahn(2.0 * US, 124.0 * NS),
            build_sequence(SequenceKind::Cpmg, 2, 2.0 * US, 374.0 * NS).unwrap(),
            build_sequence(SequenceKind::Cp, 3, 1.7 * US, 300.0 * NS).unwrap(),
        ] {
            for omega in [2.0 * PI * 1e5, 2.0 * PI * 5e5, 2.0 * PI * 2.3e6] {
                let exact = filter_fourier_exact(&seq, omega);
                let quad = quadrature_transform(&seq, omega);
                assert!((exact - quad).norm() < 1e-12 * seq.total_time(), "{exact} vs {quad}");
            }
        }
    }

    #[test]
    fn hahn_zero_width_resonance() {
        let tau = 2.0 * US;
        let s = hahn(tau, 0.0);
        let omega = 2.0 * PI / tau;
        let exact = filter_fourier_exact(&s, omega);
        assert!((exact.norm() - 4.0 / omega).abs() < 1e-12 * 4.0 / omega);
        let closed = filter_fourier_hahn(&s, omega).unwrap();
        assert!((exact - closed).norm() < 1e-12 * exact.norm());
    }

    #[test]
    fn hahn_closed_form_operating_point() {
        let s = hahn(2.0 * US, 124.0 * NS);
        let omega = 2.0 * PI * 500e3;
        let exact = filter_fourier_exact(&s, omega);
        let closed = filter_fourier_hahn(&s, omega).unwrap();
        assert!((exact - closed).norm() <= 1e-12 * exact.norm());
    }

    #[test]
    fn hahn_zeros() {
        let tau = 2.0 * US;
        let s = hahn(tau, 0.0);
        assert_eq!(filter_fourier_hahn(&s, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        let z = filter_fourier_hahn(&s, 4.0 * PI / tau).unwrap();
        assert!(z.norm() < 1e-15 * tau);
        assert!(filter_fourier_hahn(&s, 1e-9).unwrap().norm() < 1e-20);
    }

    #[test]
    fn cp_zero_width_half_resonance_golden() {
        // CP N=2, α=0 at ωτ = π sits exactly on the removable pole: the
        // guard band hands the point to the segment sum. Golden value from
        // the segment sum: segments [0,τ/2] +, [τ/2, 3τ/2] -, [3τ/2, 2τ] +.
        let tau = 1.0 * US;
        let s = build_sequence(SequenceKind::Cp, 2, tau, 0.0).unwrap();
        let omega = PI / tau;
        let exact = filter_fourier_exact(&s, omega);
        // Hand evaluation: |F| = 4τ/π at this point.
        assert!((exact.norm() - 4.0 * tau / PI).abs() < 1e-12 * tau);
        let closed = filter_fourier_cp(&s, omega).unwrap();
        assert!((exact - closed).norm() < 1e-15 * tau);
    }

    #[test]
    fn cp_closed_form_operating_points() {
        let s = build_sequence(SequenceKind::Cpmg, 2, 2.0 * US, 124.0 * NS).unwrap();
        let omega = 2.0 * PI * 500e3;
        let exact = filter_fourier_exact(&s, omega);
        let closed = filter_fourier_cp(&s, omega).unwrap();
        assert!((exact - closed).norm() <= 1e-9 * exact.norm());

        let s = build_sequence(SequenceKind::Xy8, 40, 2.374 * US, 126.0 * NS).unwrap();
        let omega = 2.0 * PI * 200e3;
        let exact = filter_fourier_exact(&s, omega);
        let closed = filter_fourier_cp(&s, omega).unwrap();
        // The passband center: large and finite.
        assert!(exact.norm().is_finite() && exact.norm() > 0.5 * s.total_time());
        assert!((exact - closed).norm() <= 1e-9 * exact.norm());
    }

    #[test]
    fn cp_rejects_odd_n() {
        let s = build_sequence(SequenceKind::Cp, 3, 1.0 * US, 0.0).unwrap();
        assert!(matches!(
            filter_fourier_cp(&s, 1e6),
            Err(Error::WrongSequenceKind { .. })
        ));
        assert!(filter_fourier_hahn(&s, 1e6).is_err());
        assert!(filter_fourier_approx_cp(&s, 1e6).is_err());
    }

    #[test]
    fn pulse_sum_matches_exact_for_odd_n() {
        for n in [1, 3, 5, 7] {
            let s = build_sequence(SequenceKind::Cp, n, 1.9 * US, 410.0 * NS).unwrap();
            for k in 1..40 {
                let omega = k as f64 * 2.0 * PI * 57e3;
                let exact = filter_fourier_exact(&s, omega);
                let sum = filter_fourier_pulse_sum(&s, omega);
                assert!((exact - sum).norm() <= 1e-10 * exact.norm() + 1e-18);
            }
        }
    }

    #[test]
    fn approx_equals_cp_when_alpha_zero() {
        let s = build_sequence(SequenceKind::Cpmg, 8, 1.5 * US, 0.0).unwrap();
        for k in 0..400 {
            let omega = k as f64 * 2.0 * PI * 10e3;
            let cp = filter_fourier_cp(&s, omega).unwrap().norm();
            let approx = filter_fourier_approx_cp(&s, omega).unwrap();
            assert_eq!(approx.validity, 0.0);
            assert!((cp - approx.magnitude).abs() <= 1e-12 * s.total_time(), "k={k}");
        }
    }

    #[test]
    fn approx_validity_metric_at_xy8_settings() {
        let s = build_sequence(SequenceKind::Xy8, 40, 2.374 * US, 126.0 * NS).unwrap();
        let omega = 2.0 * PI * 200e3;
        let approx = filter_fourier_approx_cp(&s, omega).unwrap();
        // αωτ/2 = ωτπ/2 = π · 200 kHz · 126 ns.
        assert!((approx.validity - PI * 200e3 * 126e-9).abs() < 1e-15);
        assert!((approx.validity / PI - 0.0252).abs() < 1e-4);
    }

    #[test]
    fn approx_near_passband_error_is_the_neglected_cosine() {
        // Close to the pole the braces are dominated by cos(ωτπ/2)/cos(ωP/2);
        // dropping cos(ωτπ/2) changes the magnitude by 1 - cos(ωτπ/2).
        let s = build_sequence(SequenceKind::Xy8, 40, 2.374 * US, 126.0 * NS).unwrap();
        let omega0 = 2.0 * PI * 200e3;
        let t = s.total_time();
        let neglected = 1.0 - (omega0 * s.tau_pi() / 2.0).cos();
        for k in -10..=10 {
            let omega = omega0 + k as f64 * 0.1 / t;
            let exact = filter_fourier_exact(&s, omega).norm();
            let approx = filter_fourier_approx_cp(&s, omega).unwrap().magnitude;
            let rel = (approx - exact).abs() / exact;
            assert!(rel < 1.2 * neglected, "k={k} rel={rel}");
        }
    }

    #[test]
    fn zero_width_limit_is_continuous() {
        let tau = 2.0 * US;
        let omega = 2.0 * PI * 370e3;
        let zero = filter_fourier_cp(&build_sequence(SequenceKind::Cpmg, 4, tau, 0.0).unwrap(), omega)
            .unwrap();
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let tau_pi = 100.0 * NS / 4f64.powi(k);
            let s = build_sequence(SequenceKind::Cpmg, 4, tau, tau_pi).unwrap();
            let d = (filter_fourier_cp(&s, omega).unwrap() - zero).norm();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-3 * zero.norm());
        let hz = filter_fourier_hahn(&hahn(tau, 0.0), omega).unwrap();
        let hs = filter_fourier_hahn(&hahn(tau, 1e-15), omega).unwrap();
        assert!((hz - hs).norm() < 1e-8 * hz.norm());
    }

    proptest! {
        #[test]
        fn hermitian_symmetry(
            n_idx in 0usize..6,
            tau_us in 0.1f64..10.0,
            frac in 0.0f64..1.0,
            w in 0.0f64..20.0,
        ) {
            let n = [1, 2, 4, 8, 16, 40][n_idx];
            let kind = if n == 1 { SequenceKind::HahnEcho } else { SequenceKind::Cpmg };
            let tau = tau_us * US;
            let s = build_sequence(kind, n, tau, frac * tau).unwrap();
            let omega = w * 2.0 * PI / tau;
            let plus = filter_fourier_exact(&s, omega);
            let minus = filter_fourier_exact(&s, -omega);
            prop_assert_eq!(minus, plus.conj());
        }

        #[test]
        fn closed_forms_match_exact(
            n_idx in 0usize..6,
            tau_us in 0.1f64..10.0,
            frac in 0.0f64..1.0,
            w in 0.0f64..20.0,
        ) {
            let n = [1, 2, 4, 8, 16, 40][n_idx];
            let kind = if n == 1 { SequenceKind::HahnEcho } else { kind_for(n) };
            let tau = tau_us * US;
            let s = build_sequence(kind, n, tau, frac * tau).unwrap();
            let omega = w * 2.0 * PI / tau;
            let exact = filter_fourier_exact(&s, omega);
            let closed = filter_fourier_closed(&s, omega).unwrap();
            let tol = (1e-9 * exact.norm()).max(1e-12);
            prop_assert!((exact - closed).norm() <= tol, "{} vs {}", exact, closed);
        }

        #[test]
        fn pulse_windows_tile_the_block(
            n in 1usize..50,
            tau_us in 0.1f64..10.0,
            frac in 0.0f64..1.0,
        ) {
            let tau = tau_us * US;
            let s = build_sequence(SequenceKind::Cp, n, tau, frac * tau).unwrap();
            let free: f64 = s.free_segments().iter().map(|seg| seg.end - seg.start).sum();
            let pulses: f64 = s.pulse_windows().iter().map(|w| w.len()).sum();
            let t = s.total_time();
            prop_assert!((free - n as f64 * tau).abs() < 1e-12 * t);
            prop_assert!((pulses - n as f64 * s.tau_pi()).abs() < 1e-12 * t);
            prop_assert!((free + pulses - t).abs() < 1e-12 * t);
            let windows = s.pulse_windows();
            prop_assert!(windows[0].start > 0.0);
            prop_assert!(windows[n - 1].end < t);
            for pair in windows.windows(2) {
                prop_assert!(pair[0].end < pair[1].start);
            }
            // Centers do not depend on the kind.
            let other = build_sequence(SequenceKind::Cpmg, n, tau, frac * tau).unwrap();
            prop_assert_eq!(other.pulse_centers(), s.pulse_centers());
        }
    }

    /// XY8 when N allows it, else XY4, else CPMG.
    fn kind_for(n: usize) -> SequenceKind {
        if n.is_multiple_of(8) {
            SequenceKind::Xy8
        } else if n.is_multiple_of(4) {
            SequenceKind::Xy4
        } else {
            SequenceKind::Cpmg
        }
    }
}
