//! From τ sweeps to frequency spectra.
//!
//! A CP-type block is most sensitive at `f = 1/(2P)` with `P = τ + τπ`. The
//! naive axis `f = 1/(2τ)` ignores the pulse width and places the passband too
//! high; [`Conversion::Corrected`] uses the full period.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dataset::SweepDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conversion {
    /// `f = 1/(2τ)`.
    Uncorrected,
    /// `f = 1/[2(τ + τπ)]`.
    Corrected,
}

impl fmt::Display for Conversion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Conversion::Uncorrected => "uncorrected",
            Conversion::Corrected => "corrected",
        })
    }
}

impl FromStr for Conversion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uncorrected" => Ok(Conversion::Uncorrected),
            "corrected" => Ok(Conversion::Corrected),
            _ => Err(Error::Config(format!(
                "unknown conversion {s:?}; expected corrected or uncorrected"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// Hertz.
    pub freq: f64,
    pub value: f64,
    pub sigma: f64,
}

/// Sweep values on a frequency axis, sorted by ascending frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    pub conversion: Conversion,
    /// Pulse width of the source sweep, seconds.
    pub source_tau_pi: f64,
}

/// Located main peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Refined peak frequency, hertz.
    pub freq: f64,
    /// Refined `|value|` at the peak.
    pub height: f64,
    /// 1σ uncertainty of `freq`, hertz.
    pub freq_uncertainty: f64,
    /// Index of the largest sample.
    pub index: usize,
}

pub fn tau_to_freq(tau: f64, tau_pi: f64, conversion: Conversion) -> f64 {
    match conversion {
        Conversion::Uncorrected => 1.0 / (2.0 * tau),
        Conversion::Corrected => 1.0 / (2.0 * (tau + tau_pi)),
    }
}

/// Map every point of `dataset` onto the frequency axis. The pulse width is
/// read from the dataset metadata.
pub fn convert_dataset(dataset: &SweepDataset, conversion: Conversion) -> Result<Spectrum> {
    let tau_pi = dataset.tau_pi()?;
    let mut points: Vec<SpectrumPoint> = dataset
        .points
        .iter()
        .map(|p| SpectrumPoint {
            freq: tau_to_freq(p.tau, tau_pi, conversion),
            value: p.value,
            sigma: p.sigma,
        })
        .collect();
    points.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    Ok(Spectrum {
        points,
        conversion,
        source_tau_pi: tau_pi,
    })
}

/// Minimum number of samples for [`find_main_peak`].
pub const MIN_PEAK_POINTS: usize = 7;

/// Global maximum of `|value|`, refined by the parabola through it and its
/// two neighbours.
///
/// The uncertainty combines the sample sigmas propagated through the vertex
/// with a model term: the distance to the vertex of a least-squares parabola
/// over five points, or half the local spacing when five are not available.
pub fn find_main_peak(spectrum: &Spectrum) -> Result<Peak> {
    let pts = &spectrum.points;
    if pts.len() < MIN_PEAK_POINTS {
        return Err(Error::NoPeak(format!(
            "{} points, at least {MIN_PEAK_POINTS} needed",
            pts.len()
        )));
    }
    let mut index = 0;
    for (i, p) in pts.iter().enumerate() {
        if p.value.abs() > pts[index].value.abs() {
            index = i;
        }
    }
    if index == 0 || index == pts.len() - 1 {
        return Err(Error::NoPeak(format!(
            "largest |value| is at the {} of the frequency range",
            if index == 0 { "start" } else { "end" }
        )));
    }

    let xs = [pts[index - 1].freq, pts[index].freq, pts[index + 1].freq];
    let ys = [
        pts[index - 1].value.abs(),
        pts[index].value.abs(),
        pts[index + 1].value.abs(),
    ];
    let (freq, height) = parabola_vertex(&xs, &ys).unwrap_or((xs[1], ys[1]));

    let mut propagated = 0.0;
    for k in 0..3 {
        let dy = 1e-6 * ys[1].max(f64::MIN_POSITIVE);
        let mut bumped = ys;
        bumped[k] += dy;
        let moved = parabola_vertex(&xs, &bumped).map_or(freq, |v| v.0);
        let sigma = pts[index - 1 + k].sigma;
        propagated += ((moved - freq) / dy * sigma).powi(2);
    }
    let model = if index >= 2 && index + 2 < pts.len() {
        let window = &pts[index - 2..=index + 2];
        let xs: Vec<f64> = window.iter().map(|p| p.freq).collect();
        let ys: Vec<f64> = window.iter().map(|p| p.value.abs()).collect();
        lsq_parabola_vertex(&xs, &ys, xs[2]).map_or(0.5 * (xs[3] - xs[1]), |v| (v - freq).abs())
    } else {
        0.25 * (xs[2] - xs[0])
    };

    Ok(Peak {
        freq,
        height,
        freq_uncertainty: (propagated + model * model).sqrt(),
        index,
    })
}

/// Vertex of the parabola through three points, clamped to their span.
fn parabola_vertex(xs: &[f64; 3], ys: &[f64; 3]) -> Option<(f64, f64)> {
    let x0 = xs[1];
    let (u0, u2) = (xs[0] - x0, xs[2] - x0);
    let (d0, d2) = ((ys[0] - ys[1]) / u0, (ys[2] - ys[1]) / u2);
    let a = (d2 - d0) / (u2 - u0);
    let b = d0 - a * u0;
    if a >= 0.0 {
        return None;
    }
    let u = (-b / (2.0 * a)).clamp(u0, u2);
    Some((x0 + u, ys[1] + b * u + a * u * u))
}

fn lsq_parabola_vertex(xs: &[f64], ys: &[f64], x0: f64) -> Option<f64> {
    let mut m = Matrix3::zeros();
    let mut v = Vector3::zeros();
    let scale = (xs[xs.len() - 1] - xs[0]).abs();
    for (x, y) in xs.iter().zip(ys) {
        let u = (x - x0) / scale;
        let row = Vector3::new(1.0, u, u * u);
        m += row * row.transpose();
        v += row * *y;
    }
    let c = m.cholesky()?.solve(&v);
    if c[2] >= 0.0 {
        return None;
    }
    Some(x0 - c[1] / (2.0 * c[2]) * scale)
}

/// Full width at half maximum of `|value|` around `peak`, with linear
/// interpolation between samples.
pub fn estimate_linewidth(spectrum: &Spectrum, peak: &Peak) -> Result<f64> {
    let pts = &spectrum.points;
    let half = 0.5 * peak.height;
    let crossing = |i: usize, j: usize| {
        let (a, b) = (pts[i].value.abs(), pts[j].value.abs());
        pts[i].freq + (half - a) / (b - a) * (pts[j].freq - pts[i].freq)
    };

    let below = |i: &usize| pts[*i].value.abs() <= half;
    let left = (0..peak.index).rev().find(below).map(|i| crossing(i + 1, i));
    let right = (peak.index + 1..pts.len()).find(below).map(|i| crossing(i - 1, i));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::UnresolvedWidth(format!(
            "half maximum is not crossed on the {} side of the peak at {:.6e} Hz",
            if left.is_none() { "low" } else { "high" },
            peak.freq
        ))),
    }
}

/// Local maxima of `|value|` other than the main peak, strongest first.
pub fn find_sidelobes(spectrum: &Spectrum, peak: &Peak) -> Vec<Peak> {
    let pts = &spectrum.points;
    let mut lobes: Vec<Peak> = (1..pts.len().saturating_sub(1))
        .filter(|&i| i != peak.index)
        .filter(|&i| {
            let y = pts[i].value.abs();
            y > pts[i - 1].value.abs() && y >= pts[i + 1].value.abs()
        })
        .map(|i| {
            let xs = [pts[i - 1].freq, pts[i].freq, pts[i + 1].freq];
            let ys = [pts[i - 1].value.abs(), pts[i].value.abs(), pts[i + 1].value.abs()];
            let (freq, height) = parabola_vertex(&xs, &ys).unwrap_or((xs[1], ys[1]));
            Peak {
                freq,
                height,
                freq_uncertainty: 0.25 * (xs[2] - xs[0]),
                index: i,
            }
        })
        .collect();
    lobes.sort_by(|a, b| b.height.total_cmp(&a.height));
    lobes
}

impl Spectrum {
    /// CSV with header `freq_khz,signal,sigma`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Config(format!("spectrum CSV: {e}"));
        w.write_record(["freq_khz", "signal", "sigma"]).map_err(err)?;
        for p in &self.points {
            w.write_record([(p.freq * 1e-3).to_string(), p.value.to_string(), p.sigma.to_string()])
                .map_err(err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetMeta, SequenceDescriptor, SweepPoint};
    use crate::bloch::Readout;
    use crate::sequence::{build_sequence, SequenceKind};
    use proptest::prelude::*;

    fn spectrum(points: impl IntoIterator<Item = (f64, f64)>) -> Spectrum {
        Spectrum {
            points: points
                .into_iter()
                .map(|(freq, value)| SpectrumPoint { freq, value, sigma: 1e-6 })
                .collect(),
            conversion: Conversion::Corrected,
            source_tau_pi: 0.0,
        }
    }

    /// x where sin(x)/x = 1/2, by bisection.
    fn sinc_half_point() -> f64 {
        let (mut lo, mut hi) = (1.0_f64, 3.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.sin() / mid > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn conversion_examples() {
        let (tau, tau_pi) = (2.374e-6, 126e-9);
        assert!((tau_to_freq(tau, tau_pi, Conversion::Corrected) - 200e3).abs() < 1e-6);
        let naive = tau_to_freq(tau, tau_pi, Conversion::Uncorrected);
        assert!((naive - 210.6150e3).abs() < 0.1, "{naive}");
        assert_eq!(
            tau_to_freq(tau, 0.0, Conversion::Corrected),
            tau_to_freq(tau, 0.0, Conversion::Uncorrected)
        );
    }

    #[test]
    fn dataset_conversion_sorts_and_needs_metadata() {
        let seq = build_sequence(SequenceKind::Xy8, 8, 2e-6, 100e-9).unwrap();
        let mut ds = SweepDataset {
            points: [2.0e-6, 2.5e-6, 3.0e-6]
                .iter()
                .map(|&tau| SweepPoint { tau, value: tau * 1e4, sigma: 0.01 })
                .collect(),
            meta: Some(DatasetMeta {
                sequence: SequenceDescriptor::from_sequence(&seq),
                field: None,
                readout: Readout::InPhase,
                photons_per_point: None,
                seed: None,
                nv: None,
            }),
        };
        let naive = convert_dataset(&ds, Conversion::Uncorrected).unwrap();
        assert!((naive.points[0].freq - 1.0 / 6e-6).abs() < 1e-6);
        assert!((naive.points[2].freq - 1.0 / 4e-6).abs() < 1e-6);
        assert_eq!(naive.points[0].value, 3.0e-6 * 1e4);
        let corrected = convert_dataset(&ds, Conversion::Corrected).unwrap();
        for (c, n) in corrected.points.iter().zip(&naive.points) {
            assert!(c.freq < n.freq);
        }
        ds.meta = None;
        assert!(matches!(convert_dataset(&ds, Conversion::Corrected), Err(Error::MissingMetadata(_))));
    }

    #[test]
    fn triangle_apex_is_exact() {
        let s = spectrum((0..11).map(|i| {
            let f = 100.0 + 2.0 * i as f64;
            (f, 1.0 - (f - 110.0).abs() / 20.0)
        }));
        let peak = find_main_peak(&s).unwrap();
        assert_eq!(peak.freq, 110.0);
        assert_eq!(peak.index, 5);
    }

    #[test]
    fn parabola_refines_off_grid_apex() {
        let s = spectrum((0..21).map(|i| {
            let f = i as f64;
            (f, -(5.0 - 0.01 * (f - 9.3).powi(2)))
        }));
        let peak = find_main_peak(&s).unwrap();
        assert!((peak.freq - 9.3).abs() < 1e-12);
        assert!((peak.height - 5.0).abs() < 1e-12);
        assert!(peak.freq_uncertainty < 1e-3);
    }

    #[test]
    fn ties_go_to_lower_frequency() {
        let s = spectrum([(1.0, 0.0), (2.0, 0.5), (3.0, 1.0), (4.0, 0.2), (5.0, 1.0), (6.0, 0.5), (7.0, 0.0)]);
        assert_eq!(find_main_peak(&s).unwrap().index, 2);
    }

    #[test]
    fn monotone_or_short_data_has_no_peak() {
        let s = spectrum((0..10).map(|i| (i as f64, i as f64)));
        assert!(matches!(find_main_peak(&s), Err(Error::NoPeak(_))));
        let s = spectrum((0..5).map(|i| (i as f64, 1.0 - (i as f64 - 2.0).abs())));
        assert!(matches!(find_main_peak(&s), Err(Error::NoPeak(_))));
    }

    #[test]
    fn sinc_passband_width_matches_golden_constant() {
        let x_half = sinc_half_point();
        assert!((x_half - 1.895494).abs() < 1e-6);
        let golden = 2.0 * x_half / std::f64::consts::PI;
        let t = 100e-6;
        let f0 = 200e3;
        let s = spectrum((0..801).map(|i| {
            let f = f0 - 40e3 + 100.0 * i as f64;
            let x = std::f64::consts::PI * t * (f - f0);
            (f, if x == 0.0 { 1.0 } else { (x.sin() / x).abs() })
        }));
        let peak = find_main_peak(&s).unwrap();
        let fwhm = estimate_linewidth(&s, &peak).unwrap();
        assert!((fwhm * t / golden - 1.0).abs() < 0.02, "{}", fwhm * t);
        let lobes = find_sidelobes(&s, &peak);
        assert!(lobes.len() >= 2 && lobes[0].height < 0.25);
    }

    #[test]
    fn width_needs_both_crossings() {
        let s = spectrum((0..9).map(|i| (i as f64, 1.0 - 0.05 * (i as f64 - 3.0).abs())));
        let peak = find_main_peak(&s).unwrap();
        assert!(matches!(estimate_linewidth(&s, &peak), Err(Error::UnresolvedWidth(_))));
    }

    proptest! {
        #[test]
        fn corrected_is_below_uncorrected(tau in 1e-8f64..1e-4, tau_pi in 0.0f64..1e-6) {
            let c = tau_to_freq(tau, tau_pi, Conversion::Corrected);
            let u = tau_to_freq(tau, tau_pi, Conversion::Uncorrected);
            if tau_pi > 0.0 {
                prop_assert!(c < u);
            } else {
                prop_assert_eq!(c, u);
            }
        }
    }
}
