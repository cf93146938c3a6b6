//! Commutator identities of the frame `X, X⊥, V` on random band-limited
//! functions over the Bolza surface and a conformal torus.
//!
//! `cargo run --release --example frame_identities [samples]`

use magtomo::fiber::{frame_residuals, random_fiber_function, PhaseGrid, RandomFiberSpec};
use magtomo::geometry::MagneticSurface;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn main() -> magtomo::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(10);
    let torus = magtomo::cli::ExperimentConfig::default().surface.torus()?;
    let spec = RandomFiberSpec { max_degree: 4, ..Default::default() };
    for (name, surface, n) in [("bolza(λ=0.2)", MagneticSurface::bolza(0.2), 96), ("torus", torus, 64)] {
        let grid = PhaseGrid::new(Arc::new(surface), n, 12)?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = [0.0f64; 3];
        for _ in 0..samples {
            let u = random_fiber_function(grid.model(), &spec, &mut rng).sample(&grid)?;
            let r = frame_residuals(&u)?;
            for i in 0..3 {
                worst[i] = worst[i].max(r[i]);
            }
        }
        println!("{name}: [X,V]−X⊥ {:.2e}  [V,X⊥]−X {:.2e}  [X,X⊥]+KV {:.2e}", worst[0], worst[1], worst[2]);
    }
    Ok(())
}
