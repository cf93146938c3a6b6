//! Closed geodesics of the Bolza surface up to word length 4, continued to
//! magnetic intensity 0.2.
//!
//! `cargo run --release --example bolza_orbits [out.jsonl]`

use magtomo::dynamics::orbits::{continue_table, enumerate_closed_geodesics, write_jsonl, OrbitOptions};
use magtomo::geometry::MagneticSurface;
use std::time::Instant;

fn main() -> magtomo::Result<()> {
    let mut opts = OrbitOptions::default();
    if let Some(t) = std::env::var("ORBIT_TOL").ok().and_then(|v| v.parse().ok()) {
        opts.tol = magtomo::dynamics::Tolerances::new(t, t);
    }
    let surface = MagneticSurface::bolza(0.2);
    let clock = Instant::now();
    let max_len: usize = std::env::var("MAX_LEN").ok().and_then(|v| v.parse().ok()).unwrap_or(4);
    let table = enumerate_closed_geodesics(&surface, max_len, &opts)?;
    println!(
        "{} word classes, {} closed geodesics, {} conjugate duplicates, {} skipped ({:.1}s)",
        table.classes_tried,
        table.orbits.len(),
        table.duplicates.len(),
        table.skipped.len(),
        clock.elapsed().as_secs_f64()
    );
    let worst = table.orbits.iter().map(|o| o.closure_error).fold(0.0, f64::max);
    println!("max closure error {worst:.2e}, max |T - 2 arccosh(|tr|/2)| {:.2e}", table.max_period_error);
    let shortest = &table.orbits[0];
    println!("shortest: {} with period {:.12}", shortest.label, shortest.period);

    let clock = Instant::now();
    let continued = continue_table(&table.orbits, &surface, 1.0, 4, &opts);
    let mut ok = Vec::new();
    for (label, res) in continued {
        match res {
            Ok(o) => ok.push(o),
            Err(e) => println!("continuation failed for {label}: {e}"),
        }
    }
    let worst = ok.iter().map(|o| o.closure_error).fold(0.0, f64::max);
    println!("continued {} orbits to λ = 0.2, max closure error {worst:.2e} ({:.1}s)", ok.len(), clock.elapsed().as_secs_f64());

    if let Some(path) = std::env::args().nth(1) {
        write_jsonl(std::io::BufWriter::new(std::fs::File::create(&path)?), &ok)?;
        println!("wrote {path}");
    }
    Ok(())
}
