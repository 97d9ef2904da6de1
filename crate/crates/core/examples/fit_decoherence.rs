//! Fits (r, T2, p) to a noisy Hahn-echo decay.
//!
//! Run: `cargo run --example fit_decoherence`

use ddfilter::fit::{estimate_decoherence_guess, fit_decoherence};
use ddfilter::sequence::build_sequence;
use ddfilter::signal::{linear_grid, synthesize_dataset, PhotonBudget};
use ddfilter::{NvParams, SequenceKind};

fn main() -> ddfilter::Result<()> {
    let seq = build_sequence(SequenceKind::HahnEcho, 1, 1e-6, 124e-9)?;
    let truth = NvParams::for_sequence(&seq, 0.895, 74e-6, 0.952)?;
    let grid = linear_grid(2e-6, 200e-6, 80)?;
    let ds = synthesize_dataset(&seq, None, &truth, &grid, PhotonBudget::Finite(1e5), 7)?;

    let guess = estimate_decoherence_guess(&ds, &seq)?;
    let fit = fit_decoherence(&ds, &seq, guess)?;
    println!("converged in {} iterations, reduced χ² = {:.3}", fit.iterations, fit.chi2_reduced);
    println!("r  = {:.4} ± {:.4}   (true 0.895)", fit.param("r"), fit.sigma("r"));
    println!("T2 = {:.2} ± {:.2} µs (true 74.0)", fit.param("t2") * 1e6, fit.sigma("t2") * 1e6);
    println!("p  = {:.3} ± {:.3}   (true 0.952)", fit.param("p"), fit.sigma("p"));
    Ok(())
}
