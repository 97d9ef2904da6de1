//! Finite-width multi-pulse decoupling sequences.
//!
//! A sequence is the block of N π pulses between the preparation and readout
//! π/2 pulses. The π/2 pulses are instantaneous and sit outside the block, so
//! `t = 0` is the end of the preparation pulse and the block ends at
//! `T = N (τ + τπ)`.
//!
//! Each inter-pulse period `P = τ + τπ` is laid out as `τ/2` of free
//! precession, a π pulse of width `τπ`, and another `τ/2` of free precession.
//! The j-th pulse (1-based) is centered at `(2j - 1) P / 2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Family of decoupling sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SequenceKind {
    HahnEcho,
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "CPMG")]
    Cpmg,
    #[serde(rename = "XY4")]
    Xy4,
    #[serde(rename = "XY8")]
    Xy8,
}

impl SequenceKind {
    /// Rotation axes of the π pulses for an N-pulse block of this kind.
    ///
    /// CP pulses share the axis of the preparation pulse (x), CPMG and the
    /// Hahn echo use the quadrature axis (y), and XY4/XY8 repeat their
    /// standard patterns.
    pub fn default_phases(self, n_pulses: usize) -> Vec<PulseAxis> {
        use PulseAxis::{X, Y};
        const XY4: [PulseAxis; 4] = [X, Y, X, Y];
        const XY8: [PulseAxis; 8] = [X, Y, X, Y, Y, X, Y, X];
        match self {
            SequenceKind::HahnEcho | SequenceKind::Cpmg => vec![Y; n_pulses],
            SequenceKind::Cp => vec![X; n_pulses],
            SequenceKind::Xy4 => XY4.iter().copied().cycle().take(n_pulses).collect(),
            SequenceKind::Xy8 => XY8.iter().copied().cycle().take(n_pulses).collect(),
        }
    }

    fn check_pulse_count(self, n_pulses: usize) -> Result<()> {
        let ok = match self {
            SequenceKind::HahnEcho => n_pulses == 1,
            SequenceKind::Cp | SequenceKind::Cpmg => n_pulses >= 1,
            SequenceKind::Xy4 => n_pulses >= 4 && n_pulses.is_multiple_of(4),
            SequenceKind::Xy8 => n_pulses >= 8 && n_pulses.is_multiple_of(8),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGeometry(format!(
                "{self} cannot have N = {n_pulses}"
            )))
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SequenceKind::HahnEcho => "HahnEcho",
            SequenceKind::Cp => "CP",
            SequenceKind::Cpmg => "CPMG",
            SequenceKind::Xy4 => "XY4",
            SequenceKind::Xy8 => "XY8",
        };
        f.write_str(name)
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "hahnecho" | "hahn" | "echo" => Ok(SequenceKind::HahnEcho),
            "cp" => Ok(SequenceKind::Cp),
            "cpmg" => Ok(SequenceKind::Cpmg),
            "xy4" => Ok(SequenceKind::Xy4),
            "xy8" => Ok(SequenceKind::Xy8),
            _ => Err(Error::Config(format!("unknown sequence kind `{s}`"))),
        }
    }
}

/// Rotation axis of a π pulse in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseAxis {
    X,
    Y,
}

impl PulseAxis {
    /// Azimuth of the axis in the xy-plane, radians.
    pub fn azimuth(self) -> f64 {
        match self {
            PulseAxis::X => 0.0,
            PulseAxis::Y => std::f64::consts::FRAC_PI_2,
        }
    }
}

/// A closed time interval `[start, end]`, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A stretch of free precession over which the filter function is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSegment {
    pub start: f64,
    pub end: f64,
    /// +1 or -1.
    pub sign: f64,
}

/// An N-π-pulse decoupling block with finite pulse widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    kind: SequenceKind,
    n_pulses: usize,
    tau: f64,
    tau_pi: f64,
    pulse_phases: Vec<PulseAxis>,
}

/// Build a sequence with the default phase pattern of `kind`.
pub fn build_sequence(
    kind: SequenceKind,
    n_pulses: usize,
    tau: f64,
    tau_pi: f64,
) -> Result<PulseSequence> {
    PulseSequence::new(kind, n_pulses, tau, tau_pi)
}

impl PulseSequence {
    pub fn new(kind: SequenceKind, n_pulses: usize, tau: f64, tau_pi: f64) -> Result<Self> {
        let phases = kind.default_phases(n_pulses);
        Self::with_phases(kind, n_pulses, tau, tau_pi, phases)
    }

    /// Build a sequence with an explicit list of pulse axes.
    pub fn with_phases(
        kind: SequenceKind,
        n_pulses: usize,
        tau: f64,
        tau_pi: f64,
        pulse_phases: Vec<PulseAxis>,
    ) -> Result<Self> {
        if n_pulses == 0 {
            return Err(Error::InvalidGeometry("N must be at least 1".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "free precession time must be positive, got {tau:e} s"
            )));
        }
        if !(tau_pi.is_finite() && tau_pi >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "pulse width must be non-negative, got {tau_pi:e} s"
            )));
        }
        kind.check_pulse_count(n_pulses)?;
        if pulse_phases.len() != n_pulses {
            return Err(Error::InvalidGeometry(format!(
                "{} pulse phases given for N = {n_pulses}",
                pulse_phases.len()
            )));
        }
        Ok(PulseSequence {
            kind,
            n_pulses,
            tau,
            tau_pi,
            pulse_phases,
        })
    }

    /// Same kind, N, pulse width and phases with a different free precession time.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::with_phases(
            self.kind,
            self.n_pulses,
            tau,
            self.tau_pi,
            self.pulse_phases.clone(),
        )
    }

    /// Same kind, N, τ and phases with a different pulse width.
    pub fn with_tau_pi(&self, tau_pi: f64) -> Result<Self> {
        Self::with_phases(
            self.kind,
            self.n_pulses,
            self.tau,
            tau_pi,
            self.pulse_phases.clone(),
        )
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn n_pulses(&self) -> usize {
        self.n_pulses
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_pi(&self) -> f64 {
        self.tau_pi
    }

    pub fn pulse_phases(&self) -> &[PulseAxis] {
        &self.pulse_phases
    }

    /// Duty ratio α = τπ/τ.
    pub fn alpha(&self) -> f64 {
        self.tau_pi / self.tau
    }

    /// Inter-pulse period τ + τπ = τ(1 + α).
    pub fn period(&self) -> f64 {
        self.tau + self.tau_pi
    }

    /// T = N (τ + τπ).
    pub fn total_time(&self) -> f64 {
        self.n_pulses as f64 * self.period()
    }

    /// Number of π pulses about x.
    pub fn n_x(&self) -> usize {
        self.pulse_phases.iter().filter(|&&a| a == PulseAxis::X).count()
    }

    /// Number of π pulses about y.
    pub fn n_y(&self) -> usize {
        self.n_pulses - self.n_x()
    }

    /// Center of pulse `j` (1-based): `c_j T / N` with `c_j = (2j - 1)/2`.
    pub fn pulse_center(&self, j: usize) -> f64 {
        assert!(j >= 1 && j <= self.n_pulses, "pulse index out of range");
        (2 * j - 1) as f64 * 0.5 * self.period()
    }

    pub fn pulse_centers(&self) -> Vec<f64> {
        (1..=self.n_pulses).map(|j| self.pulse_center(j)).collect()
    }

    /// The N pulse windows `[c_j T/N - τπ/2, c_j T/N + τπ/2]`, in time order.
    pub fn pulse_windows(&self) -> Vec<Interval> {
        let half = 0.5 * self.tau_pi;
        self.pulse_centers()
            .into_iter()
            .map(|c| Interval {
                start: c - half,
                end: c + half,
            })
            .collect()
    }

    /// The N + 1 maximal free-precession segments with their filter sign.
    ///
    /// The segment following pulse j carries `(-1)^j`. Adjacent half-periods
    /// that share a sign are merged, so the segments and the pulse windows
    /// alternate and tile `[0, T]`.
    pub fn free_segments(&self) -> Vec<FreeSegment> {
        let windows = self.pulse_windows();
        let mut segments = Vec::with_capacity(self.n_pulses + 1);
        let mut start = 0.0;
        let mut sign = 1.0;
        for w in &windows {
            segments.push(FreeSegment {
                start,
                end: w.start,
                sign,
            });
            start = w.end;
            sign = -sign;
        }
        segments.push(FreeSegment {
            start,
            end: self.total_time(),
            sign,
        });
        segments
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: f64 = 1e-6;
    const NS: f64 = 1e-9;

    #[test]
    fn hahn_echo_geometry() {
        let s = build_sequence(SequenceKind::HahnEcho, 1, 4.0 * US, 124.0 * NS).unwrap();
        assert!((s.total_time() - 4.124 * US).abs() < 1e-18);
        assert!((s.pulse_center(1) - 2.062 * US).abs() < 1e-18);
        assert_eq!(s.pulse_phases(), &[PulseAxis::Y]);
        assert_eq!((s.n_x(), s.n_y()), (0, 1));
    }

    #[test]
    fn zero_width_cp() {
        let tau = 3.0 * US;
        let s = build_sequence(SequenceKind::Cp, 2, tau, 0.0).unwrap();
        assert_eq!(s.alpha(), 0.0);
        assert_eq!(s.total_time(), 2.0 * tau);
        let t = s.total_time();
        assert_eq!(s.pulse_centers(), vec![t / 4.0, 3.0 * t / 4.0]);
    }

    #[test]
    fn xy8_5_centers_match_segment_enumeration() {
        let s = build_sequence(SequenceKind::Xy8, 40, 2.374 * US, 126.0 * NS).unwrap();
        assert!((s.total_time() - 100.0 * US).abs() < 1e-15);
        // Walk the timeline half-period, pulse, half-period and compare.
        let mut t = 0.0;
        for (j, c) in s.pulse_centers().iter().enumerate() {
            t += s.tau() / 2.0;
            let enumerated = t + s.tau_pi() / 2.0;
            t += s.tau_pi() + s.tau() / 2.0;
            let closed = (2.0 * (j + 1) as f64 - 1.0) * s.total_time() / 80.0;
            assert!((c - enumerated).abs() < 1e-18, "pulse {j}");
            assert!((c - closed).abs() < 1e-18, "pulse {j}");
        }
        let pattern: Vec<_> = s.pulse_phases()[..8].to_vec();
        use PulseAxis::{X, Y};
        assert_eq!(pattern, vec![X, Y, X, Y, Y, X, Y, X]);
        assert_eq!(&s.pulse_phases()[8..16], &pattern[..]);
        assert_eq!((s.n_x(), s.n_y()), (20, 20));
    }

    #[test]
    fn windows_examples() {
        let s = build_sequence(SequenceKind::HahnEcho, 1, 2.0 * US, 0.0).unwrap();
        let w = s.pulse_windows();
        assert_eq!(w.len(), 1);
        assert!((w[0].start - 1.0 * US).abs() < 1e-18 && w[0].is_empty());

        let s = build_sequence(SequenceKind::HahnEcho, 1, 2.0 * US, 200.0 * NS).unwrap();
        let w = s.pulse_windows();
        assert!((w[0].start - 1.0 * US).abs() < 1e-18);
        assert!((w[0].end - 1.2 * US).abs() < 1e-18);

        let s = build_sequence(SequenceKind::Cp, 2, 1.0 * US, 100.0 * NS).unwrap();
        let w = s.pulse_windows();
        let expect = [(0.5, 0.6), (1.6, 1.7)];
        for (iv, (a, b)) in w.iter().zip(expect) {
            assert!((iv.start - a * US).abs() < 1e-18);
            assert!((iv.end - b * US).abs() < 1e-18);
        }
    }

    #[test]
    fn invalid_geometry() {
        use SequenceKind::*;
        let bad = [
            PulseSequence::new(HahnEcho, 2, 1e-6, 0.0),
            PulseSequence::new(Cp, 0, 1e-6, 0.0),
            PulseSequence::new(Cp, 2, 0.0, 0.0),
            PulseSequence::new(Cp, 2, -1e-6, 0.0),
            PulseSequence::new(Cp, 2, 1e-6, -1e-9),
            PulseSequence::new(Cp, 2, f64::NAN, 0.0),
            PulseSequence::new(Xy8, 12, 1e-6, 0.0),
            PulseSequence::new(Xy4, 6, 1e-6, 0.0),
            PulseSequence::with_phases(Cpmg, 2, 1e-6, 0.0, vec![PulseAxis::Y]),
        ];
        for b in bad {
            assert!(matches!(b, Err(Error::InvalidGeometry(_))), "{b:?}");
        }
    }

    #[test]
    fn kind_parses_loosely() {
        assert_eq!("xy8".parse::<SequenceKind>().unwrap(), SequenceKind::Xy8);
        assert_eq!("Hahn-Echo".parse::<SequenceKind>().unwrap(), SequenceKind::HahnEcho);
        assert!("xy16".parse::<SequenceKind>().is_err());
    }
}
