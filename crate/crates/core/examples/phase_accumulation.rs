//! Echo phase for a 500 kHz, 2.75 µT field as the π pulse gets longer.
//!
//! Run: `cargo run --example phase_accumulation`

use ddfilter::field_phase::{phase_accumulation_exact, phase_accumulation_hahn};
use ddfilter::sequence::build_sequence;
use ddfilter::{AcField, NvParams, SequenceKind};

fn main() -> ddfilter::Result<()> {
    let field = AcField::new(2.75e-6, 500e3, 91.4_f64.to_radians())?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "τ (µs)", "α=0", "124 ns", "622 ns", "1120 ns");
    for i in 0..=16 {
        let tau = 1e-6 + i as f64 * 0.5e-6;
        let mut row = format!("{:>8.2}", tau * 1e6);
        for tau_pi in [0.0, 124e-9, 622e-9, 1120e-9] {
            let seq = build_sequence(SequenceKind::HahnEcho, 1, tau, tau_pi)?;
            let nv = NvParams::for_sequence(&seq, 0.9, 74e-6, 0.952)?;
            let phi = phase_accumulation_hahn(&seq, &field, &nv)?;
            debug_assert!((phi - phase_accumulation_exact(&seq, &field, &nv)).abs() < 1e-9);
            row.push_str(&format!(" {phi:>10.4}"));
        }
        println!("{row}");
    }
    Ok(())
}
