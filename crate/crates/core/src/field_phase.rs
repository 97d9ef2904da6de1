//! Single-tone AC field and the qubit phase it imprints through a sequence.
//!
//! `B(t) = B_ac cos(ω_ac t + φ_ac)` with `t = 0` at the start of the π-pulse
//! block. The accumulated phase is `Φ = ∫ F(t) γ B(t) dt`, which equals
//! `γ B_ac Re{e^{-iφ_ac} F(ω_ac)}`. Φ is not wrapped.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{filter_fourier_exact, DEFAULT_GUARD_BAND};
use crate::math::{sinc, wrap_phase};
use crate::sequence::PulseSequence;

/// Gyromagnetic ratio of the NV electron spin over 2π, Hz/T.
pub const NV_GAMMA_OVER_2PI: f64 = 28.03e9;

/// Longitudinal relaxation time of the reference NV ensemble, seconds.
/// Carried for reference; no signal model uses it.
pub const NV_T1: f64 = 7.04e-3;

/// A single-tone AC magnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcField {
    b_ac: f64,
    f_ac: f64,
    phi_ac: f64,
}

impl AcField {
    /// `b_ac` in tesla, `f_ac` in hertz, `phi_ac` in radians (wrapped to (-π, π]).
    pub fn new(b_ac: f64, f_ac: f64, phi_ac: f64) -> Result<Self> {
        if !(b_ac.is_finite() && b_ac >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "field amplitude must be >= 0, got {b_ac:e} T"
            )));
        }
        if !(f_ac.is_finite() && f_ac > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "field frequency must be > 0, got {f_ac:e} Hz"
            )));
        }
        if !phi_ac.is_finite() {
            return Err(Error::InvalidParameter("field phase must be finite".into()));
        }
        Ok(AcField {
            b_ac,
            f_ac,
            phi_ac: wrap_phase(phi_ac),
        })
    }

    pub fn b_ac(&self) -> f64 {
        self.b_ac
    }

    pub fn f_ac(&self) -> f64 {
        self.f_ac
    }

    pub fn omega_ac(&self) -> f64 {
        2.0 * PI * self.f_ac
    }

    pub fn phi_ac(&self) -> f64 {
        self.phi_ac
    }

    /// Instantaneous field, tesla.
    pub fn at(&self, t: f64) -> f64 {
        self.b_ac * (self.omega_ac() * t + self.phi_ac).cos()
    }

    pub fn with_b_ac(&self, b_ac: f64) -> Result<Self> {
        Self::new(b_ac, self.f_ac, self.phi_ac)
    }

    pub fn with_phi_ac(&self, phi_ac: f64) -> Result<Self> {
        Self::new(self.b_ac, self.f_ac, phi_ac)
    }
}

/// Sensor constants.
///
/// `n_x`/`n_y` count the π pulses about x and y of the sequence these
/// parameters are paired with; they set the readout sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvParams {
    /// Hz/T.
    pub gamma_over_2pi: f64,
    /// Dark/bright photon-count ratio.
    pub r: f64,
    /// Coherence time for the paired N, seconds.
    pub t2_of_n: f64,
    /// Stretch exponent.
    pub p: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl NvParams {
    pub fn new(
        gamma_over_2pi: f64,
        r: f64,
        t2_of_n: f64,
        p: f64,
        n_x: usize,
        n_y: usize,
    ) -> Result<Self> {
        let params = NvParams {
            gamma_over_2pi,
            r,
            t2_of_n,
            p,
            n_x,
            n_y,
        };
        params.validate()?;
        Ok(params)
    }

    /// NV gyromagnetic ratio, pulse counts taken from `seq`.
    pub fn for_sequence(seq: &PulseSequence, r: f64, t2_of_n: f64, p: f64) -> Result<Self> {
        Self::new(NV_GAMMA_OVER_2PI, r, t2_of_n, p, seq.n_x(), seq.n_y())
    }

    /// Same constants re-paired with another sequence's pulse counts.
    pub fn paired_with(&self, seq: &PulseSequence) -> Self {
        NvParams {
            n_x: seq.n_x(),
            n_y: seq.n_y(),
            ..*self
        }
    }

    /// Gyromagnetic ratio, rad s⁻¹ T⁻¹.
    pub fn gamma(&self) -> f64 {
        2.0 * PI * self.gamma_over_2pi
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if !(self.gamma_over_2pi.is_finite() && self.gamma_over_2pi > 0.0) {
            return bad(format!("gamma/2π must be > 0, got {}", self.gamma_over_2pi));
        }
        if !(self.r >= 0.0 && self.r < 1.0) {
            return bad(format!("r must lie in [0, 1), got {}", self.r));
        }
        if !(self.t2_of_n.is_finite() && self.t2_of_n > 0.0) {
            return bad(format!("T2 must be > 0, got {}", self.t2_of_n));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return bad(format!("stretch exponent must be > 0, got {}", self.p));
        }
        Ok(())
    }

    /// Checks `n_x + n_y = N` for `seq`.
    pub fn check_pairing(&self, seq: &PulseSequence) -> Result<()> {
        if self.n_x + self.n_y != seq.n_pulses() {
            return Err(Error::InvalidParameter(format!(
                "n_x + n_y = {} does not match N = {}",
                self.n_x + self.n_y,
                seq.n_pulses()
            )));
        }
        Ok(())
    }
}

/// Φ by integrating `F(t) γ B(t)` exactly over every free segment.
///
/// A segment `[a, b]` of sign `s` contributes
/// `s γ B_ac [sin(ωb + φ) - sin(ωa + φ)] / ω`, evaluated in product form.
pub fn phase_accumulation_exact(seq: &PulseSequence, field: &AcField, nv: &NvParams) -> f64 {
    let omega = field.omega_ac();
    let phi = field.phi_ac();
    let integral: f64 = seq
        .free_segments()
        .iter()
        .map(|s| {
            let len = s.end - s.start;
            let mid = 0.5 * (s.start + s.end);
            s.sign * len * sinc(0.5 * omega * len) * (omega * mid + phi).cos()
        })
        .sum();
    nv.gamma() * field.b_ac() * integral
}

/// Φ as `γ B_ac Re{e^{-iφ_ac} F(ω_ac)}` with the exact segment-sum transform.
pub fn phase_accumulation_spectral(seq: &PulseSequence, field: &AcField, nv: &NvParams) -> f64 {
    let f = filter_fourier_exact(seq, field.omega_ac());
    let (s, c) = field.phi_ac().sin_cos();
    nv.gamma() * field.b_ac() * (c * f.re + s * f.im)
}

/// Hahn-echo closed form:
///
/// `Φ = (4γB/ω) sin[ωτ(1+α)/2 + φ] sin(ωτ/4) sin[ωτ(1+2α)/4]`.
pub fn phase_accumulation_hahn(seq: &PulseSequence, field: &AcField, nv: &NvParams) -> Result<f64> {
    if seq.n_pulses() != 1 {
        return Err(Error::WrongSequenceKind {
            operation: "phase_accumulation_hahn",
            expected: "N = 1",
            kind: seq.kind(),
            n_pulses: seq.n_pulses(),
        });
    }
    let omega = field.omega_ac();
    let tau = seq.tau();
    let alpha = seq.alpha();
    Ok(4.0 * nv.gamma() * field.b_ac() / omega
        * (omega * tau * (1.0 + alpha) / 2.0 + field.phi_ac()).sin()
        * (omega * tau / 4.0).sin()
        * (omega * tau * (1.0 + 2.0 * alpha) / 4.0).sin())
}

/// CP-type closed form (even N), default guard band.
pub fn phase_accumulation_cp(seq: &PulseSequence, field: &AcField, nv: &NvParams) -> Result<f64> {
    phase_accumulation_cp_guarded(seq, field, nv, DEFAULT_GUARD_BAND)
}

/// CP-type closed form (even N):
///
/// `Φ = γB cos[ωNτ(1+α)/2 + φ] Nτ(1+α) {1 - cos(αωτ/2)/cos[ωτ(1+α)/2]} sinc[ωNτ(1+α)/2]`.
///
/// Inside the guard band around `cos[ωτ(1+α)/2] = 0` the exact route is used.
pub fn phase_accumulation_cp_guarded(
    seq: &PulseSequence,
    field: &AcField,
    nv: &NvParams,
    guard: f64,
) -> Result<f64> {
    if !seq.n_pulses().is_multiple_of(2) {
        return Err(Error::WrongSequenceKind {
            operation: "phase_accumulation_cp",
            expected: "an even number of pulses",
            kind: seq.kind(),
            n_pulses: seq.n_pulses(),
        });
    }
    let omega = field.omega_ac();
    let tau = seq.tau();
    let alpha = seq.alpha();
    let denom = (omega * tau * (1.0 + alpha) / 2.0).cos();
    if denom.abs() < guard {
        return Ok(phase_accumulation_exact(seq, field, nv));
    }
    let big_t = seq.total_time();
    Ok(nv.gamma()
        * field.b_ac()
        * (omega * big_t / 2.0 + field.phi_ac()).cos()
        * big_t
        * (1.0 - (alpha * omega * tau / 2.0).cos() / denom)
        * sinc(omega * big_t / 2.0))
}

/// Φ by the closed form that fits the sequence: Hahn for N = 1, CP for even
/// N, exact integration for odd N > 1.
pub fn phase_accumulation(seq: &PulseSequence, field: &AcField, nv: &NvParams) -> f64 {
    match seq.n_pulses() {
        1 => phase_accumulation_hahn(seq, field, nv).expect("N = 1"),
        n if n % 2 == 0 => phase_accumulation_cp(seq, field, nv).expect("even N"),
        _ => phase_accumulation_exact(seq, field, nv),
    }
}
