//! Finite-width dynamical-decoupling toolkit for AC magnetometry.
//!
//! The crate models N-π-pulse decoupling blocks whose π pulses have a finite
//! width `tau_pi`, and follows that geometry through every stage of an AC
//! magnetometry experiment:
//!
//! - [`sequence`]: pulse timing geometry (windows, centers, free segments).
//! - [`filter`]: the ±1/0 time-domain filter and its Fourier transform, by an
//!   exact segment sum and by the closed forms for Hahn-echo and CP-type blocks.
//! - [`field_phase`]: phase accumulated from a single-tone AC field.
//! - [`bloch`]: an independent Bloch-vector integrator with rectangular
//!   finite-width pulses, used to check the filter-function model.
//! - [`signal`] and [`dataset`]: decoherence-weighted readout signals and
//!   shot-noise-limited synthetic sweeps.
//! - [`fit`]: weighted Levenberg-Marquardt estimation of field and
//!   coherence parameters.
//! - [`spectral`]: τ-to-frequency conversion (with and without the pulse-width
//!   correction), main-peak localization and linewidth.
//! - [`cli`]: the `ddfilter` batch front-end.
//!
//! All quantities are SI inside the library (seconds, hertz, tesla, radians).
//! The configuration files used by the CLI take ns, kHz and nT.

pub mod bloch;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod field_phase;
pub mod filter;
pub mod fit;
pub mod sequence;
pub mod signal;
pub mod spectral;

mod math;

pub use error::{Error, Result};
pub use field_phase::{AcField, NvParams};
pub use sequence::{PulseAxis, PulseSequence, SequenceKind};
