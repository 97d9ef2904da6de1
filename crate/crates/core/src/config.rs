//! TOML run configuration for the `ddfilter` binary.
//!
//! Interface units are ns, kHz, nT and degrees; everything is converted to SI
//! on the way in. A run may be split over several files. Each file either
//! uses section tables:
//!
//! ```toml
//! [sequence]
//! kind = "XY8"
//! N = 40
//! tau_pi_ns = 126
//!
//! [field]
//! b_ac_nt = 45.6
//! f_ac_khz = 200
//! phi_ac_deg = 181.2
//! ```
//!
//! or is flat, in which case each key is routed to the section that owns it.
//! Sections: `sequence`, `field`, `nv`, `grid`, `noise`, `output`. A key may
//! be given only once across all files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::field_phase::{AcField, NvParams, NV_GAMMA_OVER_2PI};
use crate::sequence::{PulseAxis, PulseSequence, SequenceKind};
use crate::signal::{linear_grid, PhotonBudget};

const SECTIONS: [(&str, &[&str]); 6] = [
    ("sequence", &["kind", "N", "n", "n_pulses", "tau_ns", "tau_pi_ns", "phases"]),
    ("field", &["b_ac_nt", "f_ac_khz", "phi_ac_deg"]),
    ("nv", &["gamma_over_2pi_ghz_per_t", "r", "t2_ns", "p"]),
    ("grid", &["tau_start_ns", "tau_stop_ns", "points"]),
    ("noise", &["photons_per_point", "seed", "sigma_floor"]),
    ("output", &["dataset"]),
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    #[serde(deserialize_with = "kind_from_str")]
    pub kind: SequenceKind,
    #[serde(alias = "N", alias = "n")]
    pub n_pulses: usize,
    /// Needed only where no τ grid is given.
    pub tau_ns: Option<f64>,
    pub tau_pi_ns: f64,
    /// Overrides the default phase pattern of `kind`.
    pub phases: Option<Vec<PulseAxis>>,
}

fn kind_from_str<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<SequenceKind, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl SequenceConfig {
    /// The configured sequence, at `tau` (seconds) if given, else at `tau_ns`.
    pub fn build(&self, tau: Option<f64>) -> Result<PulseSequence> {
        let tau = match (tau, self.tau_ns) {
            (Some(t), _) => t,
            (None, Some(ns)) => ns * 1e-9,
            (None, None) => return Err(Error::Config("sequence.tau_ns is required here".into())),
        };
        let phases = self
            .phases
            .clone()
            .unwrap_or_else(|| self.kind.default_phases(self.n_pulses));
        PulseSequence::with_phases(self.kind, self.n_pulses, tau, self.tau_pi_ns * 1e-9, phases)
    }

    /// Like [`build`](Self::build) but with a placeholder τ, for templates
    /// whose τ is replaced point by point.
    pub fn template(&self) -> Result<PulseSequence> {
        self.build(Some(self.tau_ns.map_or(1e-6, |ns| ns * 1e-9)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub b_ac_nt: f64,
    pub f_ac_khz: f64,
    #[serde(default)]
    pub phi_ac_deg: f64,
}

impl FieldConfig {
    pub fn to_field(&self) -> Result<AcField> {
        AcField::new(self.b_ac_nt * 1e-9, self.f_ac_khz * 1e3, self.phi_ac_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NvConfig {
    #[serde(default = "default_gamma")]
    pub gamma_over_2pi_ghz_per_t: f64,
    pub r: Option<f64>,
    pub t2_ns: Option<f64>,
    pub p: Option<f64>,
}

fn default_gamma() -> f64 {
    NV_GAMMA_OVER_2PI * 1e-9
}

impl Default for NvConfig {
    fn default() -> Self {
        NvConfig {
            gamma_over_2pi_ghz_per_t: default_gamma(),
            r: None,
            t2_ns: None,
            p: None,
        }
    }
}

impl NvConfig {
    pub fn gamma_over_2pi(&self) -> f64 {
        self.gamma_over_2pi_ghz_per_t * 1e9
    }

    /// Full signal constants paired with `seq`; `r`, `t2_ns` and `p` must be set.
    pub fn to_nv(&self, seq: &PulseSequence) -> Result<NvParams> {
        let missing = |k: &str| Error::Config(format!("nv.{k} is required here"));
        NvParams::new(
            self.gamma_over_2pi(),
            self.r.ok_or_else(|| missing("r"))?,
            self.t2_ns.ok_or_else(|| missing("t2_ns"))? * 1e-9,
            self.p.ok_or_else(|| missing("p"))?,
            seq.n_x(),
            seq.n_y(),
        )
    }

    /// Constants for phase-only work; contrast and decay get placeholders.
    pub fn phase_only(&self, seq: &PulseSequence) -> Result<NvParams> {
        NvParams::new(self.gamma_over_2pi(), 0.0, 1.0, 1.0, seq.n_x(), seq.n_y())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub tau_start_ns: f64,
    pub tau_stop_ns: f64,
    pub points: usize,
}

impl GridConfig {
    /// Seconds.
    pub fn taus(&self) -> Result<Vec<f64>> {
        linear_grid(self.tau_start_ns * 1e-9, self.tau_stop_ns * 1e-9, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Absent means noiseless.
    pub photons_per_point: Option<f64>,
    /// Required whenever `photons_per_point` is set.
    pub seed: Option<u64>,
    pub sigma_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dataset: Option<PathBuf>,
}

/// Merged configuration of one run.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sequence: Option<SequenceConfig>,
    pub field: Option<FieldConfig>,
    pub nv: Option<NvConfig>,
    pub grid: Option<GridConfig>,
    pub noise: Option<NoiseConfig>,
    pub output: Option<OutputConfig>,
}

/// A configuration file as read, kept for the run manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFile {
    pub path: PathBuf,
    pub contents: String,
}

impl InputFile {
    pub fn read(path: &Path) -> Result<Self> {
        let contents = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(InputFile {
            path: path.to_path_buf(),
            contents,
        })
    }
}

impl RunConfig {
    /// Read and merge configuration files.
    pub fn load(paths: &[&Path]) -> Result<(Self, Vec<InputFile>)> {
        let files = paths.iter().map(|p| InputFile::read(p)).collect::<Result<Vec<_>>>()?;
        let docs = files.iter().map(|f| (f.path.display().to_string(), f.contents.as_str()));
        Ok((Self::from_documents(docs)?, files))
    }

    /// Merge TOML documents given as `(name, text)` pairs.
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = (String, &'a str)>) -> Result<Self> {
        let mut merged = Table::new();
        for (name, text) in docs {
            let table: Table = text
                .parse()
                .map_err(|e| Error::Config(format!("{name}: {e}")))?;
            for (key, value) in table {
                match (SECTIONS.iter().find(|(s, _)| *s == key), value) {
                    (Some((section, _)), Value::Table(t)) => {
                        for (k, v) in t {
                            insert(&mut merged, section, k, v, &name)?;
                        }
                    }
                    (_, value) => {
                        let section = SECTIONS
                            .iter()
                            .find(|(_, keys)| keys.contains(&key.as_str()))
                            .map(|(s, _)| *s)
                            .ok_or_else(|| Error::Config(format!("{name}: unknown key `{key}`")))?;
                        insert(&mut merged, section, key, value, &name)?;
                    }
                }
            }
        }
        RunConfig::deserialize(Value::Table(merged)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sequence(&self) -> Result<&SequenceConfig> {
        self.sequence
            .as_ref()
            .ok_or_else(|| Error::Config("no [sequence] configuration".into()))
    }

    pub fn field(&self) -> Result<AcField> {
        self.field
            .as_ref()
            .ok_or_else(|| Error::Config("no [field] configuration".into()))?
            .to_field()
    }

    pub fn nv(&self) -> NvConfig {
        self.nv.unwrap_or_default()
    }

    /// Photon budget, enforcing a seed whenever noise is enabled.
    pub fn budget(&self) -> Result<(PhotonBudget, u64)> {
        match self.noise {
            Some(NoiseConfig { photons_per_point: Some(n), seed, .. }) => {
                let seed = seed.ok_or_else(|| Error::Config("noise.seed is required when photons_per_point is set".into()))?;
                Ok((PhotonBudget::Finite(n), seed))
            }
            Some(NoiseConfig { sigma_floor: Some(floor), .. }) => {
                Ok((PhotonBudget::Infinite { sigma_floor: floor }, 0))
            }
            _ => Ok((PhotonBudget::noiseless(), 0)),
        }
    }
}

fn insert(merged: &mut Table, section: &str, key: String, value: Value, file: &str) -> Result<()> {
    let entry = merged
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    let table = entry.as_table_mut().expect("sections are tables");
    if table.contains_key(&key) {
        return Err(Error::Config(format!("{file}: `{section}.{key}` is set twice")));
    }
    table.insert(key, value);
    Ok(())
}
