//! α-control estimates: the infimum of the Pestov quotient over random
//! functions. Positive on the Bolza surface for moderate intensity and
//! negative on a flat torus carrying a constant magnetic field.
//!
//! `cargo run --release --example alpha_control [samples]`

use magtomo::fiber::{PhaseGrid, RandomFiberSpec};
use magtomo::geometry::MagneticSurface;
use magtomo::pestov::alpha_estimate;
use std::sync::Arc;

fn main() -> magtomo::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(50);
    let spec = RandomFiberSpec { max_degree: 4, ..Default::default() };
    let cases = [
        ("bolza λ=0", MagneticSurface::bolza(0.0), 96),
        ("bolza λ=0.2", MagneticSurface::bolza(0.2), 96),
        ("bolza λ=0.5", MagneticSurface::bolza(0.5), 96),
        ("flat torus λ=1", MagneticSurface::flat_torus(1.0), 32),
    ];
    for (name, surface, n) in cases {
        let grid = PhaseGrid::new(Arc::new(surface), n, 12)?;
        let est = alpha_estimate(&grid, samples, &spec, 3)?;
        println!("{name:<16} α̂ = {:+.6} over {} functions (argmin {})", est.alpha, est.sample_count, est.argmin);
    }
    Ok(())
}
