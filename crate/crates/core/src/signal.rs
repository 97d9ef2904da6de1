//! Decoherence-weighted readout signals and synthetic shot-noise sweeps.
//!
//! Quadrature readout (field present):
//! `S = (-1)^{n_y+1} C exp[-(Nτ/T2)^p] sin Φ`;
//! in-phase readout (no field):
//! `S = (-1)^{n_x+1} C exp[-(Nτ/T2)^p]`,
//! with optical contrast `C = (1 - r)/(1 + r)`.
//!
//! # Noise model
//!
//! Each point is read twice, ending with a π/2 and with a 3π/2 pulse. With
//! `n0` expected bright-state photons and dark/bright ratio `r`, the two
//! readouts are Poisson with means `n0 (1 + r)/2 · (1 ± S)`, and the reported
//! value is their difference over their sum. This normalization is a
//! modelling choice: it recovers `S` on average and has
//! `σ² ≈ (1 - S²) / (n0 (1 + r))`, the sigma attached to each point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::bloch::Readout;
use crate::dataset::{DatasetMeta, SequenceDescriptor, SweepDataset, SweepPoint};
use crate::error::{Error, Result};
use crate::field_phase::{phase_accumulation, AcField, NvParams};
use crate::math::parity_sign;
use crate::sequence::PulseSequence;

/// Optical contrast `(1 - r)/(1 + r)`.
pub fn contrast(r: f64) -> f64 {
    (1.0 - r) / (1.0 + r)
}

/// Stretched-exponential coherence envelope `exp[-(Nτ/T2)^p]`.
pub fn decay(seq: &PulseSequence, nv: &NvParams) -> f64 {
    let x = seq.n_pulses() as f64 * seq.tau() / nv.t2_of_n;
    (-x.powf(nv.p)).exp()
}

/// Quadrature signal. `nv` must be paired with `seq`.
pub fn signal_quadrature(seq: &PulseSequence, field: &AcField, nv: &NvParams) -> Result<f64> {
    nv.check_pairing(seq)?;
    let phase = phase_accumulation(seq, field, nv);
    Ok(parity_sign(nv.n_y + 1) * contrast(nv.r) * decay(seq, nv) * phase.sin())
}

/// In-phase signal. `nv` must be paired with `seq`.
pub fn signal_inphase(seq: &PulseSequence, nv: &NvParams) -> Result<f64> {
    nv.check_pairing(seq)?;
    Ok(parity_sign(nv.n_x + 1) * contrast(nv.r) * decay(seq, nv))
}

/// Photon budget of a synthetic sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonBudget {
    /// Expected bright-state photons per point.
    Finite(f64),
    /// Noiseless values; every point carries `sigma_floor`.
    Infinite { sigma_floor: f64 },
}

impl PhotonBudget {
    pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;

    pub fn noiseless() -> Self {
        PhotonBudget::Infinite {
            sigma_floor: Self::DEFAULT_SIGMA_FLOOR,
        }
    }

    fn photons(self) -> Option<f64> {
        match self {
            PhotonBudget::Finite(n) => Some(n),
            PhotonBudget::Infinite { .. } => None,
        }
    }
}

/// Shot-noise standard deviation of a difference-over-sum value `s`.
pub fn shot_noise_sigma(s: f64, photons: f64, r: f64) -> f64 {
    ((1.0 - s * s).max(0.0) / (photons * (1.0 + r))).sqrt()
}

/// Synthesize a τ sweep of `template`.
///
/// With a field the quadrature signal is recorded, otherwise the in-phase
/// one. Point `i` draws from its own ChaCha stream `(seed, i)`, so the result
/// does not depend on thread count.
pub fn synthesize_dataset(
    template: &PulseSequence,
    field: Option<&AcField>,
    nv: &NvParams,
    tau_grid: &[f64],
    budget: PhotonBudget,
    seed: u64,
) -> Result<SweepDataset> {
    check_grid(tau_grid)?;
    nv.validate()?;
    let nv = nv.paired_with(template);
    match budget {
        PhotonBudget::Finite(n) if !(n.is_finite() && n > 0.0) => {
            return Err(Error::InvalidParameter(format!(
                "photons per point must be > 0, got {n}"
            )));
        }
        PhotonBudget::Infinite { sigma_floor } if !(sigma_floor.is_finite() && sigma_floor > 0.0) => {
            return Err(Error::InvalidParameter(format!(
                "sigma floor must be > 0, got {sigma_floor}"
            )));
        }
        _ => {}
    }

    let points = tau_grid
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let seq = template.with_tau(tau)?;
            let model = match field {
                Some(f) => signal_quadrature(&seq, f, &nv)?,
                None => signal_inphase(&seq, &nv)?,
            };
            let (value, sigma) = match budget {
                PhotonBudget::Infinite { sigma_floor } => (model, sigma_floor),
                PhotonBudget::Finite(n0) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    let mean = 0.5 * n0 * (1.0 + nv.r);
                    let a = draw_poisson(mean * (1.0 + model), &mut rng);
                    let b = draw_poisson(mean * (1.0 - model), &mut rng);
                    let value = if a + b > 0.0 { (a - b) / (a + b) } else { 0.0 };
                    (value, shot_noise_sigma(model, n0, nv.r))
                }
            };
            Ok(SweepPoint { tau, value, sigma })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepDataset {
        points,
        meta: Some(DatasetMeta {
            sequence: SequenceDescriptor::from_sequence(template),
            field: field.copied(),
            readout: if field.is_some() {
                Readout::Quadrature
            } else {
                Readout::InPhase
            },
            photons_per_point: budget.photons(),
            seed: budget.photons().map(|_| seed),
            nv: Some(nv),
        }),
    })
}

fn draw_poisson(lambda: f64, rng: &mut ChaCha8Rng) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive finite mean").sample(rng)
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(start.is_finite() && stop.is_finite()) || start <= 0.0 || stop <= start {
        return Err(Error::InvalidGrid(format!(
            "need 0 < start < stop and at least 2 points, got [{start:e}, {stop:e}] with {n}"
        )));
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty τ grid".into()));
    }
    if let Some(bad) = grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidGrid(format!("τ = {bad:e} s is not positive")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("τ grid must be strictly increasing".into()));
    }
    Ok(())
}
