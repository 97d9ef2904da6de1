//! The `ddfilter` command line.
//!
//! Exit codes: 0 on success, 2 for usage, configuration and I/O errors, 3 for
//! numerical failures. Every output file `X` is accompanied by
//! `X.manifest.json`, which records the argument vector, the seed and the
//! full contents and SHA-256 of every input. Output that goes to standard
//! output gets its manifest on standard error instead. All outputs of a run
//! are computed before the first one is written, and each is written to a
//! temporary file and renamed into place.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bloch::{ideal_signal, simulate_sequence, DriveSpec, Readout};
use crate::config::{InputFile, RunConfig};
use crate::dataset::{json_error, sidecar_path, write_atomic, SweepDataset};
use crate::error::{Error, Result};
use crate::field_phase::{phase_accumulation, phase_accumulation_exact};
use crate::filter::{sample_filter, FilterMethod};
use crate::fit::{estimate_decoherence_guess, fit_ac_field, fit_decoherence, DecoherenceGuess, FieldGuess};
use crate::signal::{synthesize_dataset, PhotonBudget};
use crate::spectral::{convert_dataset, estimate_linewidth, find_main_peak, Conversion};

#[derive(Debug, Parser)]
#[command(name = "ddfilter", version, about = "Finite-width dynamical-decoupling filter functions for AC magnetometry")]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter function |F(ω)| of a sequence on a frequency grid.
    Filter(FilterArgs),
    /// Accumulated phase Φ for a sequence and field.
    Phase(PhaseArgs),
    /// Synthesize a τ sweep dataset.
    Sweep(SweepArgs),
    /// Fit coherence or field parameters to a dataset.
    Fit(FitArgs),
    /// Convert a dataset to a frequency spectrum and locate its main peak.
    Spectrum(SpectrumArgs),
    /// Compare the Bloch-equation simulation with the filter-function model.
    OracleCheck(OracleArgs),
}

#[derive(Debug, clap::Args)]
struct FilterArgs {
    /// Configuration file(s) with a [sequence] section.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Free precession time; overrides sequence.tau_ns.
    #[arg(long)]
    tau_ns: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    f_start_khz: f64,
    /// Defaults to three times the first passband frequency.
    #[arg(long)]
    f_stop_khz: Option<f64>,
    #[arg(long, default_value_t = 256)]
    points: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
    method: MethodArg,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Analytic,
    Approx,
}

#[derive(Debug, clap::Args)]
struct PhaseArgs {
    /// Configuration file(s) with [sequence] and [field], optionally [nv] and [grid].
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    #[arg(long)]
    tau_ns: Option<f64>,
    /// Closed form or direct time-domain integration.
    #[arg(long, value_enum, default_value_t = PhaseMethod::Closed)]
    method: PhaseMethod,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhaseMethod {
    Closed,
    Exact,
}

#[derive(Debug, clap::Args)]
struct SweepArgs {
    /// Configuration file(s) with [sequence], [nv], [grid] and optionally [field], [noise], [output].
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Output CSV; overrides output.dataset. Standard output if neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    /// Dataset CSV with its .meta.json sidecar.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Configuration with [nv]: held fixed for acfield, starting values for decoherence.
    #[arg(long)]
    fixed: Option<PathBuf>,
    /// Field frequency; defaults to the dataset metadata.
    #[arg(long)]
    f_ac_khz: Option<f64>,
    /// Starting amplitude; estimated from the data if omitted.
    #[arg(long)]
    init_b_nt: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    init_phi_deg: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Decoherence,
    Acfield,
}

#[derive(Debug, clap::Args)]
struct SpectrumArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ConversionArg::Corrected)]
    conversion: ConversionArg,
    /// Spectrum CSV; the summary goes to `<stem>.summary.json` beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConversionArg {
    Corrected,
    Uncorrected,
}

#[derive(Debug, clap::Args)]
struct OracleArgs {
    /// Configuration file(s) with [sequence] and optionally [grid], [nv].
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Configuration file with [field], if not in --config.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Rabi frequency Ω/2π; defaults to one π rotation per pulse window.
    #[arg(long)]
    rabi_mhz: Option<f64>,
    #[arg(long, value_enum, default_value_t = ReadoutArg::Quadrature)]
    readout: ReadoutArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReadoutArg {
    Quadrature,
    Inphase,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: &'a [String],
    workers: Option<usize>,
    seed: Option<u64>,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
    contents: String,
}

/// What a subcommand produced, before anything is written.
struct Outcome {
    /// Main output; goes to stdout when no path is given.
    primary: (Option<PathBuf>, Vec<u8>),
    /// Extra files written next to the primary one (sidecars, summaries).
    extra: Vec<(PathBuf, Vec<u8>)>,
    /// Written to stderr when the primary output goes to stdout.
    stderr_extra: Vec<u8>,
    inputs: Vec<InputFile>,
    seed: Option<u64>,
}

/// Run the command line `args` (including the program name); returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli, &argv)),
            Err(e) => Err(Error::Config(format!("cannot start {n} workers: {e}"))),
        },
        None => execute(&cli, &argv),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ddfilter: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    let outcome = match &cli.command {
        Command::Filter(a) => filter_cmd(a)?,
        Command::Phase(a) => phase_cmd(a)?,
        Command::Sweep(a) => sweep_cmd(a)?,
        Command::Fit(a) => fit_cmd(a)?,
        Command::Spectrum(a) => spectrum_cmd(a)?,
        Command::OracleCheck(a) => oracle_cmd(a)?,
    };
    emit(outcome, argv, cli.workers)
}

fn emit(outcome: Outcome, argv: &[String], workers: Option<usize>) -> Result<()> {
    let (primary_path, primary) = outcome.primary;
    let mut outputs: Vec<String> = outcome.extra.iter().map(|(p, _)| p.display().to_string()).collect();
    if let Some(p) = &primary_path {
        outputs.push(p.display().to_string());
    }
    let manifest = Manifest {
        tool: "ddfilter",
        version: env!("CARGO_PKG_VERSION"),
        argv,
        workers,
        seed: outcome.seed,
        inputs: outcome
            .inputs
            .iter()
            .map(|f| ManifestInput {
                path: f.path.display().to_string(),
                sha256: hex::encode(Sha256::digest(f.contents.as_bytes())),
                contents: f.contents.clone(),
            })
            .collect(),
        outputs,
    };
    let mut manifest_json = serde_json::to_vec_pretty(&manifest).map_err(json_error)?;
    manifest_json.push(b'\n');

    match primary_path {
        Some(path) => {
            for (p, bytes) in &outcome.extra {
                write_atomic(p, bytes)?;
            }
            write_atomic(&path, &primary)?;
            write_atomic(&manifest_path(&path), &manifest_json)?;
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&primary)?;
            let mut err = std::io::stderr();
            err.write_all(&outcome.stderr_extra)?;
            err.write_all(&manifest_json)?;
        }
    }
    Ok(())
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn load(paths: &[PathBuf]) -> Result<(RunConfig, Vec<InputFile>)> {
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    RunConfig::load(&refs)
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("CSV: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn filter_cmd(a: &FilterArgs) -> Result<Outcome> {
    let (cfg, inputs) = load(&a.config)?;
    let seq = cfg.sequence()?.build(a.tau_ns.map(|t| t * 1e-9))?;
    let f_stop = a.f_stop_khz.map_or(3.0 / (2.0 * seq.period()), |f| f * 1e3);
    let freqs = linear_grid_inclusive(a.f_start_khz * 1e3, f_stop, a.points)?;
    let method = match a.method {
        MethodArg::Exact => FilterMethod::Exact,
        MethodArg::Analytic => FilterMethod::Analytic,
        MethodArg::Approx => FilterMethod::Approx,
    };
    let omegas: Vec<f64> = freqs.iter().map(|f| 2.0 * PI * f).collect();
    let samples = sample_filter(&seq, &omegas, method)?;
    let body = csv_bytes(
        ["f_khz", "re_ns", "im_ns", "abs_ns"],
        samples.iter().map(|s| {
            [s.omega / (2.0 * PI) * 1e-3, s.value.re * 1e9, s.value.im * 1e9, s.value.norm() * 1e9]
        }),
    )?;
    Ok(simple(a.out.clone(), body, inputs, None))
}

/// Evenly spaced frequencies, zero start allowed.
fn linear_grid_inclusive(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    if !(start >= 0.0 && stop > start && n >= 2 && stop.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "need 0 <= start < stop and at least 2 points, got [{start}, {stop}] Hz with {n}"
        )));
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

fn simple(out: Option<PathBuf>, body: Vec<u8>, inputs: Vec<InputFile>, seed: Option<u64>) -> Outcome {
    Outcome {
        primary: (out, body),
        extra: Vec::new(),
        stderr_extra: Vec::new(),
        inputs,
        seed,
    }
}

fn phase_cmd(a: &PhaseArgs) -> Result<Outcome> {
    let (cfg, inputs) = load(&a.config)?;
    let seq_cfg = cfg.sequence()?;
    let field = cfg.field()?;
    let taus = match (a.tau_ns, &cfg.grid) {
        (Some(t), _) => vec![t * 1e-9],
        (None, Some(g)) => g.taus()?,
        (None, None) => vec![seq_cfg.build(None)?.tau()],
    };
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let seq = seq_cfg.build(Some(tau))?;
            let nv = cfg.nv().phase_only(&seq)?;
            let phase = match a.method {
                PhaseMethod::Closed => phase_accumulation(&seq, &field, &nv),
                PhaseMethod::Exact => phase_accumulation_exact(&seq, &field, &nv),
            };
            Ok([tau * 1e9, phase])
        })
        .collect::<Result<Vec<_>>>()?;
    let body = csv_bytes(["tau_ns", "phase_rad"], rows)?;
    Ok(simple(a.out.clone(), body, inputs, None))
}

fn sweep_cmd(a: &SweepArgs) -> Result<Outcome> {
    let (cfg, inputs) = load(&a.config)?;
    let template = cfg.sequence()?.template()?;
    let grid = cfg
        .grid
        .ok_or_else(|| Error::Config("sweep needs a [grid] section".into()))?
        .taus()?;
    let nv = cfg.nv().to_nv(&template)?;
    let field = cfg.field.as_ref().map(|f| f.to_field()).transpose()?;
    let (budget, seed) = cfg.budget()?;
    let ds = synthesize_dataset(&template, field.as_ref(), &nv, &grid, budget, seed)?;
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.dataset.clone()));
    let mut extra = Vec::new();
    let mut stderr_extra = Vec::new();
    let meta = serde_json::to_vec_pretty(ds.meta.as_ref().expect("synthesized data has metadata")).map_err(json_error)?;
    match &out {
        Some(p) => extra.push((sidecar_path(p), meta)),
        None => {
            stderr_extra = meta;
            stderr_extra.push(b'\n');
        }
    }
    let seed = matches!(budget, PhotonBudget::Finite(_)).then_some(seed);
    Ok(Outcome {
        primary: (out, ds.to_csv()?),
        extra,
        stderr_extra,
        inputs,
        seed,
    })
}

fn dataset_inputs(path: &Path) -> Result<(SweepDataset, Vec<InputFile>)> {
    let mut inputs = vec![InputFile::read(path)?];
    let side = sidecar_path(path);
    if side.exists() {
        inputs.push(InputFile::read(&side)?);
    }
    let ds = SweepDataset::read(path)?;
    Ok((ds, inputs))
}

fn fit_cmd(a: &FitArgs) -> Result<Outcome> {
    let (ds, mut inputs) = dataset_inputs(&a.dataset)?;
    let meta = ds
        .meta
        .as_ref()
        .ok_or_else(|| Error::MissingMetadata(format!("{} has no .meta.json sidecar", a.dataset.display())))?;
    let template = meta.sequence.at_tau(ds.points.first().map_or(1e-6, |p| p.tau))?;
    let fixed = match &a.fixed {
        Some(p) => {
            let (cfg, files) = load(std::slice::from_ref(p))?;
            inputs.extend(files);
            Some(cfg.nv())
        }
        None => None,
    };

    let result = match a.model {
        ModelArg::Decoherence => {
            let guess = match fixed {
                Some(nv) if nv.r.is_some() && nv.t2_ns.is_some() && nv.p.is_some() => {
                    let nv = nv.to_nv(&template)?;
                    DecoherenceGuess { r: nv.r, t2: nv.t2_of_n, p: nv.p }
                }
                _ => estimate_decoherence_guess(&ds, &template)?,
            };
            fit_decoherence(&ds, &template, guess)?
        }
        ModelArg::Acfield => {
            let nv = match fixed {
                Some(nv) => nv.to_nv(&template)?,
                None => meta
                    .nv
                    .ok_or_else(|| Error::Config("acfield fits need --fixed with an [nv] section".into()))?,
            };
            let f_ac = match (a.f_ac_khz, meta.field) {
                (Some(f), _) => f * 1e3,
                (None, Some(field)) => field.f_ac(),
                (None, None) => return Err(Error::Config("field frequency unknown; pass --f-ac-khz".into())),
            };
            let guess = FieldGuess {
                b_ac: a.init_b_nt.map_or(0.0, |b| b * 1e-9),
                phi_ac: a.init_phi_deg.to_radians(),
                f_ac,
            };
            fit_ac_field(&ds, &template, &nv, guess)?
        }
    };
    let mut body = serde_json::to_vec_pretty(&result).map_err(json_error)?;
    body.push(b'\n');
    Ok(simple(a.out.clone(), body, inputs, None))
}

#[derive(Debug, Serialize)]
struct SpectrumSummary {
    conversion: Conversion,
    source_tau_pi_s: f64,
    peak_freq_hz: f64,
    peak_freq_uncertainty_hz: f64,
    peak_height: f64,
    linewidth_hz: Option<f64>,
    linewidth_error: Option<String>,
}

fn spectrum_cmd(a: &SpectrumArgs) -> Result<Outcome> {
    let (ds, inputs) = dataset_inputs(&a.dataset)?;
    let conversion = match a.conversion {
        ConversionArg::Corrected => Conversion::Corrected,
        ConversionArg::Uncorrected => Conversion::Uncorrected,
    };
    let spectrum = convert_dataset(&ds, conversion)?;
    let peak = find_main_peak(&spectrum)?;
    let width = estimate_linewidth(&spectrum, &peak);
    let summary = SpectrumSummary {
        conversion,
        source_tau_pi_s: spectrum.source_tau_pi,
        peak_freq_hz: peak.freq,
        peak_freq_uncertainty_hz: peak.freq_uncertainty,
        peak_height: peak.height,
        linewidth_hz: width.as_ref().ok().copied(),
        linewidth_error: width.err().map(|e| e.to_string()),
    };
    let mut summary_json = serde_json::to_vec_pretty(&summary).map_err(json_error)?;
    summary_json.push(b'\n');
    let (extra, stderr_extra) = match &a.out {
        Some(p) => (vec![(summary_path(p), summary_json)], Vec::new()),
        None => (Vec::new(), summary_json),
    };
    Ok(Outcome {
        primary: (a.out.clone(), spectrum.to_csv()?),
        extra,
        stderr_extra,
        inputs,
        seed: None,
    })
}

/// `spec.csv` → `spec.summary.json`.
fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.json"))
}

fn oracle_cmd(a: &OracleArgs) -> Result<Outcome> {
    let mut paths = a.config.clone();
    paths.extend(a.field.clone());
    let (cfg, inputs) = load(&paths)?;
    let seq_cfg = cfg.sequence()?;
    let field = cfg.field()?;
    let taus = match &cfg.grid {
        Some(g) => g.taus()?,
        None => vec![seq_cfg.build(None)?.tau()],
    };
    let readout = match a.readout {
        ReadoutArg::Quadrature => Readout::Quadrature,
        ReadoutArg::Inphase => Readout::InPhase,
    };
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let seq = seq_cfg.build(Some(tau))?;
            let nv = cfg.nv().phase_only(&seq)?;
            let drive = match a.rabi_mhz {
                Some(f) => DriveSpec::with_rabi_frequency(&seq, f * 1e6),
                None if seq.tau_pi() > 0.0 => DriveSpec::pi_pulses(&seq)?,
                None => DriveSpec::with_rabi_frequency(&seq, 1.0),
            };
            let bloch = simulate_sequence(&seq, &field, &nv, &drive, readout)?;
            let analytic = ideal_signal(&seq, phase_accumulation(&seq, &field, &nv), readout);
            Ok([tau, bloch, analytic, (bloch - analytic).abs()])
        })
        .collect::<Result<Vec<_>>>()?;
    let body = csv_bytes(["tau_s", "signal_bloch", "signal_analytic", "abs_error"], rows)?;
    Ok(simple(a.out.clone(), body, inputs, None))
}
