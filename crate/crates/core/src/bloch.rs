//! Rotating-frame Bloch-vector simulation of a decoupling sequence.
//!
//! This is the physics check for the filter-function model: instead of
//! assuming that no phase accrues during a π pulse, it integrates
//!
//! `dS/dt = W(t) × S`, `W = (Ω cos φ_p, Ω sin φ_p, γ B(t))`
//!
//! through every free segment (`Ω = 0`) and pulse window (`Ω = 2π f_Rabi`,
//! rectangular envelope), restarting the integrator at each boundary. The
//! preparation and readout π/2 pulses are instantaneous:
//!
//! - preparation: `(π/2)_x`, taking `+z` to `-y`;
//! - in-phase readout: `(π/2)_x`; quadrature readout: `(π/2)_y`.
//!
//! The returned signal is `S_z` after readout. In the strong-drive limit it
//! tends to `(-1)^{n_x+1} cos Φ` (in-phase) and `(-1)^{n_y+1} sin Φ`
//! (quadrature), the same signs as the decoherence-free signal models.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_phase::{AcField, NvParams};
use crate::math::parity_sign;
use crate::sequence::{PulseAxis, PulseSequence};

/// Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochState {
    pub const UP: BlochState = BlochState {
        sx: 0.0,
        sy: 0.0,
        sz: 1.0,
    };

    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }

    fn to_array(self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    fn from_array(v: [f64; 3]) -> Self {
        BlochState {
            sx: v[0],
            sy: v[1],
            sz: v[2],
        }
    }

    /// Right-handed rotation by `angle` about the unit axis `(nx, ny, nz)`.
    pub fn rotated(&self, axis: [f64; 3], angle: f64) -> Self {
        let v = self.to_array();
        let (s, c) = angle.sin_cos();
        let dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
        let cross = [
            axis[1] * v[2] - axis[2] * v[1],
            axis[2] * v[0] - axis[0] * v[2],
            axis[0] * v[1] - axis[1] * v[0],
        ];
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = v[i] * c + cross[i] * s + axis[i] * dot * (1.0 - c);
        }
        Self::from_array(out)
    }
}

/// Control drive during the π-pulse windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Ω/2π, hertz.
    pub rabi_frequency: f64,
    /// Rotation axis of each pulse.
    pub pulse_axis_phases: Vec<PulseAxis>,
}

impl DriveSpec {
    /// Rabi frequency that makes each window of `seq` a π rotation
    /// (`Ω τπ = π`), axes from the sequence.
    pub fn pi_pulses(seq: &PulseSequence) -> Result<Self> {
        if seq.tau_pi() <= 0.0 {
            return Err(Error::InvalidParameter(
                "a π-pulse Rabi frequency needs a finite pulse width".into(),
            ));
        }
        Ok(DriveSpec {
            rabi_frequency: 1.0 / (2.0 * seq.tau_pi()),
            pulse_axis_phases: seq.pulse_phases().to_vec(),
        })
    }

    /// Fixed Rabi frequency, axes from the sequence.
    pub fn with_rabi_frequency(seq: &PulseSequence, rabi_frequency: f64) -> Self {
        DriveSpec {
            rabi_frequency,
            pulse_axis_phases: seq.pulse_phases().to_vec(),
        }
    }

    /// Rotation angle of one pulse of width `tau_pi`.
    pub fn rotation_angle(&self, tau_pi: f64) -> f64 {
        2.0 * PI * self.rabi_frequency * tau_pi
    }
}

/// Phase of the final π/2 pulse relative to the preparation pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    InPhase,
    Quadrature,
}

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

/// Full result of one simulated shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOutcome {
    /// `S_z` after the readout pulse.
    pub signal: f64,
    /// Bloch vector at the end of the π-pulse block.
    pub final_state: BlochState,
    /// Largest `| |S| - 1 |` seen at any accepted step.
    pub max_norm_drift: f64,
    pub steps: usize,
}

/// Simulated readout signal with default integrator tolerances.
pub fn simulate_sequence(
    seq: &PulseSequence,
    field: &AcField,
    nv: &NvParams,
    drive: &DriveSpec,
    readout: Readout,
) -> Result<f64> {
    simulate_sequence_with(seq, field, nv, drive, readout, &IntegratorOptions::default())
        .map(|o| o.signal)
}

pub fn simulate_sequence_with(
    seq: &PulseSequence,
    field: &AcField,
    nv: &NvParams,
    drive: &DriveSpec,
    readout: Readout,
    opts: &IntegratorOptions,
) -> Result<SimulationOutcome> {
    if drive.pulse_axis_phases.len() != seq.n_pulses() {
        return Err(Error::InvalidParameter(format!(
            "{} pulse axes for N = {}",
            drive.pulse_axis_phases.len(),
            seq.n_pulses()
        )));
    }
    if seq.tau_pi() > 0.0 && !(drive.rabi_frequency > 0.0 && drive.rabi_frequency.is_finite()) {
        return Err(Error::InvalidParameter(
            "finite-width pulses need a positive Rabi frequency".into(),
        ));
    }

    let gamma_b = nv.gamma() * field.b_ac();
    let omega = field.omega_ac();
    let phi = field.phi_ac();
    let detuning = move |t: f64| gamma_b * (omega * t + phi).cos();
    let rabi = 2.0 * PI * drive.rabi_frequency;

    let mut state = BlochState::UP.rotated([1.0, 0.0, 0.0], PI / 2.0);
    let mut drift: f64 = 0.0;
    let mut steps = 0;

    let segments = seq.free_segments();
    let windows = seq.pulse_windows();
    for (k, seg) in segments.iter().enumerate() {
        if seg.end > seg.start {
            let rhs = |t: f64, s: &[f64; 3]| cross([0.0, 0.0, detuning(t)], s);
            let run = integrate(rhs, seg.start, seg.end, state.to_array(), gamma_b.abs(), opts)?;
            state = BlochState::from_array(run.y);
            drift = drift.max(run.max_norm_drift);
            steps += run.steps;
        }
        if let Some(w) = windows.get(k) {
            let axis = drive.pulse_axis_phases[k].azimuth();
            if w.end > w.start {
                let (ax, ay) = (rabi * axis.cos(), rabi * axis.sin());
                let rhs = |t: f64, s: &[f64; 3]| cross([ax, ay, detuning(t)], s);
                let rate = rabi.hypot(gamma_b);
                let run = integrate(rhs, w.start, w.end, state.to_array(), rate, opts)?;
                state = BlochState::from_array(run.y);
                drift = drift.max(run.max_norm_drift);
                steps += run.steps;
            } else {
                state = state.rotated([axis.cos(), axis.sin(), 0.0], PI);
            }
        }
    }

    let readout_axis = match readout {
        Readout::InPhase => [1.0, 0.0, 0.0],
        Readout::Quadrature => [0.0, 1.0, 0.0],
    };
    let signal = state.rotated(readout_axis, PI / 2.0).sz;
    Ok(SimulationOutcome {
        signal,
        final_state: state,
        max_norm_drift: drift,
        steps,
    })
}

/// Strong-drive limit of [`simulate_sequence`]: `(-1)^{n_x+1} cos Φ` or
/// `(-1)^{n_y+1} sin Φ` for a phase Φ.
pub fn ideal_signal(seq: &PulseSequence, phase: f64, readout: Readout) -> f64 {
    match readout {
        Readout::InPhase => parity_sign(seq.n_x() + 1) * phase.cos(),
        Readout::Quadrature => parity_sign(seq.n_y() + 1) * phase.sin(),
    }
}

fn cross(a: [f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

struct Integration {
    y: [f64; 3],
    steps: usize,
    max_norm_drift: f64,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (fifth minus embedded fourth order).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand-Prince integration of `y' = f(t, y)` from `t0` to `t1`.
/// `rate` bounds `|W|` and only seeds the first step.
fn integrate<F>(f: F, t0: f64, t1: f64, y0: [f64; 3], rate: f64, opts: &IntegratorOptions) -> Result<Integration>
where
    F: Fn(f64, &[f64; 3]) -> [f64; 3],
{
    let span = t1 - t0;
    let mut h = if rate > 0.0 { (0.05 / rate).min(span) } else { span };
    let min_step = 1e-14 * t1.abs().max(span);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut steps = 0;
    let mut drift: f64 = 0.0;

    let axpy = |y: &[f64; 3], terms: &[(f64, &[f64; 3])], h: f64| {
        let mut out = *y;
        for (c, k) in terms {
            for i in 0..3 {
                out[i] += h * c * k[i];
            }
        }
        out
    };

    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::IntegrationFailure(format!(
                "step budget of {} exhausted at t = {t:e} s",
                opts.max_steps
            )));
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(
            t + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = f(
            t + h,
            &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
        );
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y_new);

        let mut err: f64 = 0.0;
        for i in 0..3 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }

        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k7;
            steps += 1;
            let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            drift = drift.max((norm - 1.0).abs());
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if !h.is_finite() || (t < t1 && h < min_step) {
            return Err(Error::IntegrationFailure(format!(
                "step size underflow at t = {t:e} s"
            )));
        }
    }
    Ok(Integration {
        y,
        steps,
        max_norm_drift: drift,
    })
}
