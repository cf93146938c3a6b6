//! Pestov's identity for the magnetic generator, term by term, on random
//! functions over the Bolza surface at several intensities.
//!
//! `cargo run --release --example pestov_identity`

use magtomo::fiber::{random_fiber_function, PhaseGrid, RandomFiberSpec};
use magtomo::geometry::MagneticSurface;
use magtomo::pestov::pestov_check;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn main() -> magtomo::Result<()> {
    let spec = RandomFiberSpec { max_degree: 4, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!("{:>6} {:>14} {:>14} {:>14} {:>14} {:>10}", "λ", "‖VGu‖²", "‖GVu‖²", "−(𝕂Vu,Vu)", "‖Gu‖²", "residual");
    for lambda in [0.0, 0.2, 0.5] {
        let grid = PhaseGrid::new(Arc::new(MagneticSurface::bolza(lambda)), 96, 12)?;
        let u = random_fiber_function(grid.model(), &spec, &mut rng).sample(&grid)?;
        let r = pestov_check(&u)?;
        println!(
            "{lambda:>6} {:>14.8} {:>14.8} {:>14.8} {:>14.8} {:>10.2e}",
            r.lhs, r.rhs_terms[0], r.rhs_terms[1], r.rhs_terms[2], r.relative_residual
        );
    }
    Ok(())
}
