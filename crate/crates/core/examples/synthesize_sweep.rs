//! Writes a shot-noise-limited Hahn-echo sweep to a CSV with a JSON sidecar,
//! then reads it back.
//!
//! Run: `cargo run --example synthesize_sweep [out.csv]`

use std::path::PathBuf;

use ddfilter::dataset::SweepDataset;
use ddfilter::sequence::build_sequence;
use ddfilter::signal::{linear_grid, synthesize_dataset, PhotonBudget};
use ddfilter::{AcField, NvParams, SequenceKind};

fn main() -> ddfilter::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hahn_sweep.csv"));

    let seq = build_sequence(SequenceKind::HahnEcho, 1, 1e-6, 124e-9)?;
    let field = AcField::new(2.75e-6, 500e3, 91.4_f64.to_radians())?;
    let nv = NvParams::for_sequence(&seq, 0.895, 74e-6, 0.952)?;
    let grid = linear_grid(0.5e-6, 9e-6, 200)?;
    let ds = synthesize_dataset(&seq, Some(&field), &nv, &grid, PhotonBudget::Finite(1e5), 2021)?;
    ds.write(&out)?;

    let back = SweepDataset::read(&out)?;
    println!("wrote {} points to {}", back.points.len(), out.display());
    for p in back.points.iter().step_by(25) {
        println!("τ = {:>7.1} ns  S = {:+.4} ± {:.4}", p.tau * 1e9, p.value, p.sigma);
    }
    Ok(())
}
