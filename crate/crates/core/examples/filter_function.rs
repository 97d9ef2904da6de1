//! Compares |F(ω)| of an XY8-5 block with zero-width and 126 ns pulses.
//!
//! Run: `cargo run --example filter_function`

use std::f64::consts::PI;

use ddfilter::filter::{filter_fourier_approx_cp, filter_fourier_exact, sample_filter, FilterMethod};
use ddfilter::sequence::build_sequence;
use ddfilter::SequenceKind;

fn main() -> ddfilter::Result<()> {
    let tau = 2.374e-6;
    let ideal = build_sequence(SequenceKind::Xy8, 40, tau, 0.0)?;
    let real = build_sequence(SequenceKind::Xy8, 40, tau, 126e-9)?;

    let omegas: Vec<f64> = (1..=60).map(|k| 2.0 * PI * (150e3 + k as f64 * 1.5e3)).collect();
    let a = sample_filter(&ideal, &omegas, FilterMethod::Analytic)?;
    let b = sample_filter(&real, &omegas, FilterMethod::Analytic)?;

    println!("{:>9} {:>12} {:>12} {:>10}", "f (kHz)", "|F| α=0 (µs)", "|F| (µs)", "validity");
    for (x, y) in a.iter().zip(&b).step_by(4) {
        let approx = filter_fourier_approx_cp(&real, x.omega)?;
        println!(
            "{:>9.1} {:>12.4} {:>12.4} {:>10.4}",
            x.omega / (2.0 * PI) * 1e-3,
            x.value.norm() * 1e6,
            y.value.norm() * 1e6,
            approx.validity
        );
    }

    let peak = |v: &[ddfilter::filter::FilterSample]| {
        v.iter().max_by(|p, q| p.value.norm().total_cmp(&q.value.norm())).unwrap().omega / (2.0 * PI)
    };
    println!("passband centre: {:.1} kHz (α=0), {:.1} kHz (τπ=126 ns)", peak(&a) * 1e-3, peak(&b) * 1e-3);

    let w = b[20].omega;
    let diff = (filter_fourier_exact(&real, w) - b[20].value).norm();
    println!("closed form vs segment sum at {:.1} kHz: |Δ| = {diff:.2e} s", w / (2.0 * PI) * 1e-3);
    Ok(())
}
