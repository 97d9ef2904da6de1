//! XY8-5 sweep of a 200 kHz field: the naive τ → f conversion puts the peak
//! about 10 kHz high, the pulse-width-corrected one puts it back on 200 kHz.
//!
//! Run: `cargo run --example frequency_shift`

use ddfilter::sequence::build_sequence;
use ddfilter::signal::{linear_grid, synthesize_dataset, PhotonBudget};
use ddfilter::spectral::{convert_dataset, estimate_linewidth, find_main_peak, find_sidelobes, Conversion};
use ddfilter::{AcField, NvParams, SequenceKind};

fn main() -> ddfilter::Result<()> {
    let seq = build_sequence(SequenceKind::Xy8, 40, 2.374e-6, 126e-9)?;
    let field = AcField::new(45.6e-9, 200e3, 181.2_f64.to_radians())?;
    let nv = NvParams::for_sequence(&seq, 0.895, 300e-6, 1.0)?;
    let grid = linear_grid(2e-6, 3e-6, 401)?;
    let ds = synthesize_dataset(&seq, Some(&field), &nv, &grid, PhotonBudget::noiseless(), 0)?;

    for conversion in [Conversion::Uncorrected, Conversion::Corrected] {
        let spec = convert_dataset(&ds, conversion)?;
        let peak = find_main_peak(&spec)?;
        let fwhm = estimate_linewidth(&spec, &peak)?;
        let lobes = find_sidelobes(&spec, &peak);
        println!(
            "{conversion:>11}: peak {:.2} ± {:.2} kHz, FWHM {:.2} kHz, {} side lobes",
            peak.freq * 1e-3,
            peak.freq_uncertainty * 1e-3,
            fwhm * 1e-3,
            lobes.len()
        );
    }
    Ok(())
}
