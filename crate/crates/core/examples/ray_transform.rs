//! Magnetic ray transform over the closed orbits of word length at most 2.
//! Potentials integrate to zero over every orbit while a degree-2 tensor
//! does not. The constant function returns the period.
//!
//! `cargo run --release --example ray_transform [out.csv]`

use magtomo::dynamics::{continue_table, enumerate_closed_geodesics, FlowField, OrbitOptions};
use magtomo::fiber::{random_fiber_function, PhaseGrid, RandomFiberSpec};
use magtomo::geometry::{MagneticSurface, PhasePoint};
use magtomo::tomography::{make_potential, prepare_paths, random_tensor, RayOptions, RayTransformTable};
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn main() -> magtomo::Result<()> {
    let surface = Arc::new(MagneticSurface::bolza(0.2));
    let opts = OrbitOptions::default();
    let table = enumerate_closed_geodesics(&surface, 2, &opts)?;
    let orbits = continue_table(&table.orbits, &surface, 1.0, 4, &opts).into_iter().map(|(_, r)| r).collect::<magtomo::Result<Vec<_>>>()?;
    let field = FlowField::new(surface.clone());
    let ray = RayOptions::default();
    let paths = prepare_paths(&field, &orbits, &ray)?;
    println!("{} closed orbits at λ = 0.2", paths.len());

    let grid = PhaseGrid::new(surface.clone(), 96, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_fiber_function(grid.model(), &RandomFiberSpec { max_degree: 1, real: true, ..Default::default() }, &mut rng).sample(&grid)?;
    let potential = RayTransformTable::compute(&make_potential(&a)?, &field, &paths, "potential", &ray)?;
    println!("potential:     max |I|/T = {:.2e} (quadrature estimate {:.2e})", potential.max_relative(), potential.max_relative_error_estimate());

    let q = random_tensor(surface.model(), 2, 2, &mut rng)?.lift(&grid)?;
    let tensor = RayTransformTable::compute(&q, &field, &paths, "tensor", &ray)?;
    println!("degree-2 lift: max |I|/T = {:.2e}", tensor.max_relative());

    let one = |_: PhasePoint| C::new(1.0, 0.0);
    let witness = RayTransformTable::from_function(&one, &paths, "constant", &ray);
    let shortest = &witness.entries[0];
    println!("constant:      I = {:.12} on {} with period {:.12}", shortest.value, shortest.orbit_label, shortest.period);

    if let Some(path) = std::env::args().nth(1) {
        potential.write_csv(std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
