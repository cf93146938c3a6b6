//! Recover `a` from `f = (X + λV)a` by the band-truncated transport solve on
//! a conformal torus; the solution is unique up to constants.
//!
//! `cargo run --release --example transport_recovery`

use magtomo::fiber::{random_fiber_function, FiberFunction, PhaseGrid, RandomFiberSpec};
use magtomo::tomography::{make_potential, truncated_transport_solve};
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn main() -> magtomo::Result<()> {
    let surface = magtomo::cli::ExperimentConfig::default().surface.torus()?;
    let grid = PhaseGrid::new(Arc::new(surface), 8, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = RandomFiberSpec { max_degree: 1, real: true, base_band: 1, ..Default::default() };
    let a = random_fiber_function(grid.model(), &spec, &mut rng).sample(&grid)?;
    let sol = truncated_transport_solve(&make_potential(&a)?, 2)?;

    let one = FiberFunction::constant(&grid, C::new(1.0, 0.0));
    let gauged = a.sub(&one.scale(a.inner_product(&one)? / one.inner_product(&one)?));
    println!("kernel dimension {}, relative residual {:.2e}", sol.kernel_dim, sol.relative_residual);
    println!("‖u − a‖/‖a‖ after removing the constant: {:.2e}", sol.u.sub(&gauged).l2_norm() / a.l2_norm());
    for (k, e) in &sol.degree_profile {
        println!("  degree {k:+}: energy {e:.3e}");
    }
    Ok(())
}
