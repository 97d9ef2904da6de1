//! Sweep datasets and their on-disk form.
//!
//! A dataset is a CSV file with header `tau_ns,signal,sigma` plus a JSON
//! sidecar `<stem>.meta.json` next to it. The sidecar is SI throughout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bloch::Readout;
use crate::error::{Error, Result};
use crate::field_phase::{AcField, NvParams};
use crate::sequence::{PulseAxis, PulseSequence, SequenceKind};

/// One sample of a τ sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Free precession time, seconds.
    pub tau: f64,
    pub value: f64,
    /// 1σ uncertainty of `value`.
    pub sigma: f64,
}

/// The τ-independent part of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDescriptor {
    pub kind: SequenceKind,
    pub n_pulses: usize,
    /// Pulse width, seconds.
    pub tau_pi: f64,
    pub pulse_phases: Vec<PulseAxis>,
}

impl SequenceDescriptor {
    pub fn from_sequence(seq: &PulseSequence) -> Self {
        SequenceDescriptor {
            kind: seq.kind(),
            n_pulses: seq.n_pulses(),
            tau_pi: seq.tau_pi(),
            pulse_phases: seq.pulse_phases().to_vec(),
        }
    }

    /// The described sequence at free precession time `tau`.
    pub fn at_tau(&self, tau: f64) -> Result<PulseSequence> {
        PulseSequence::with_phases(
            self.kind,
            self.n_pulses,
            tau,
            self.tau_pi,
            self.pulse_phases.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub sequence: SequenceDescriptor,
    /// The field that was applied, if any.
    pub field: Option<AcField>,
    pub readout: Readout,
    /// Expected photon count per point; `None` for noiseless data.
    pub photons_per_point: Option<f64>,
    pub seed: Option<u64>,
    /// Signal-model constants used to generate the data, if known.
    pub nv: Option<NvParams>,
}

/// Signal samples against τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDataset {
    pub points: Vec<SweepPoint>,
    pub meta: Option<DatasetMeta>,
}

impl SweepDataset {
    /// Checks τ strictly increasing and finite positive sigmas.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.tau.is_finite() && p.tau > 0.0) {
                return Err(Error::InvalidGrid(format!("point {i}: τ = {:e} s", p.tau)));
            }
            if !(p.sigma.is_finite() && p.sigma > 0.0) {
                return Err(Error::DegenerateData(format!("point {i}: sigma = {}", p.sigma)));
            }
            if !p.value.is_finite() {
                return Err(Error::DegenerateData(format!("point {i}: non-finite value")));
            }
        }
        if let Some(w) = self.points.windows(2).position(|w| w[1].tau <= w[0].tau) {
            return Err(Error::InvalidGrid(format!(
                "τ not strictly increasing at point {}",
                w + 1
            )));
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn tau_pi(&self) -> Result<f64> {
        self.meta
            .as_ref()
            .map(|m| m.sequence.tau_pi)
            .ok_or_else(|| Error::MissingMetadata("dataset has no pulse width".into()))
    }

    /// CSV body with header `tau_ns,signal,sigma`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tau_ns", "signal", "sigma"]).map_err(csv_error)?;
        for p in &self.points {
            w.write_record([
                (p.tau * 1e9).to_string(),
                p.value.to_string(),
                p.sigma.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn points_from_csv(bytes: &[u8]) -> Result<Vec<SweepPoint>> {
        #[derive(Deserialize)]
        struct Row {
            tau_ns: f64,
            signal: f64,
            sigma: f64,
        }
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers().map_err(csv_error)?.clone();
        if header.iter().collect::<Vec<_>>() != ["tau_ns", "signal", "sigma"] {
            return Err(Error::Config(format!(
                "dataset header must be tau_ns,signal,sigma, got {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        r.deserialize::<Row>()
            .map(|row| {
                let row = row.map_err(csv_error)?;
                Ok(SweepPoint {
                    tau: row.tau_ns * 1e-9,
                    value: row.signal,
                    sigma: row.sigma,
                })
            })
            .collect()
    }

    /// Writes the CSV and, when present, the metadata sidecar. Both files are
    /// replaced atomically.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let body = self.to_csv()?;
        if let Some(meta) = &self.meta {
            let json = serde_json::to_vec_pretty(meta).map_err(json_error)?;
            write_atomic(&sidecar_path(csv_path), &json)?;
        }
        write_atomic(csv_path, &body)
    }

    /// Reads a CSV and its sidecar, if one exists.
    pub fn read(csv_path: &Path) -> Result<Self> {
        let points = Self::points_from_csv(&fs::read(csv_path)?)?;
        let side = sidecar_path(csv_path);
        let meta = if side.exists() {
            Some(serde_json::from_slice(&fs::read(&side)?).map_err(json_error)?)
        } else {
            None
        };
        Ok(SweepDataset { points, meta })
    }
}

/// `d.csv` → `d.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

/// Write `bytes` to a temporary file beside `path`, then rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("dataset CSV: {e}"))
}

pub(crate) fn json_error(e: serde_json::Error) -> Error {
    Error::Config(format!("JSON: {e}"))
}
