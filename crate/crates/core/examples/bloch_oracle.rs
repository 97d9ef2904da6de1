//! Bloch-vector simulation of a Hahn echo with rectangular pulses, against
//! the filter-function prediction sin Φ.
//!
//! Run: `cargo run --release --example bloch_oracle`

use ddfilter::bloch::{simulate_sequence, DriveSpec, Readout};
use ddfilter::field_phase::phase_accumulation_hahn;
use ddfilter::sequence::build_sequence;
use ddfilter::signal::linear_grid;
use ddfilter::{AcField, NvParams, SequenceKind};

fn main() -> ddfilter::Result<()> {
    let field = AcField::new(2.75e-6, 500e3, 91.4_f64.to_radians())?;
    for tau_pi in [124e-9, 62e-9, 31e-9] {
        let mut worst: f64 = 0.0;
        for tau in linear_grid(0.5e-6, 9e-6, 100)? {
            let seq = build_sequence(SequenceKind::HahnEcho, 1, tau, tau_pi)?;
            let nv = NvParams::for_sequence(&seq, 0.9, 1.0, 1.0)?;
            let drive = DriveSpec::pi_pulses(&seq)?;
            let sim = simulate_sequence(&seq, &field, &nv, &drive, Readout::Quadrature)?;
            let model = phase_accumulation_hahn(&seq, &field, &nv)?.sin();
            worst = worst.max((sim - model).abs());
        }
        println!(
            "τπ = {:>3.0} ns  (Ω/2π = {:>5.2} MHz): max |Bloch − sin Φ| = {worst:.3e}",
            tau_pi * 1e9,
            1e-6 / (2.0 * tau_pi)
        );
    }
    Ok(())
}
