//! Stable and unstable Riccati solutions along magnetic geodesics of the
//! Bolza surface, and the leading Lyapunov exponent of the flow.
//!
//! `cargo run --release --example riccati_hyperbolicity [lambda]`

use magtomo::dynamics::{hyperbolicity_report, riccati_solve, FlowField, HyperbolicityOptions, RiccatiOptions};
use magtomo::geometry::{MagneticSurface, PhasePoint};
use std::sync::Arc;

fn main() -> magtomo::Result<()> {
    let lambda: f64 = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(0.2);
    let field = FlowField::new(Arc::new(MagneticSurface::bolza(lambda)));
    let z0 = PhasePoint::new(0.1, -0.2, 0.7);
    let pair = riccati_solve(&field, z0, 20.0, &RiccatiOptions::default())?;
    for j in (0..pair.times.len()).step_by((pair.times.len() / 8).max(1)) {
        println!("t = {:6.2}  r⁺ = {:+.10}  r⁻ = {:+.10}", pair.times[j], pair.r_plus[j], pair.r_minus[j]);
    }
    println!("min separation {:.10}, max residual {:.2e}", pair.separation, pair.max_residual);

    let starts = [z0, PhasePoint::new(-0.3, 0.1, 2.0)];
    let (_, h) = hyperbolicity_report(&field, &starts, &HyperbolicityOptions::default())?;
    println!(
        "Lyapunov exponent {:.4} ± {:.4} (√(1−λ²) = {:.4}), Anosov consistent: {}",
        h.exponent,
        h.stderr,
        (1.0 - lambda * lambda).sqrt(),
        h.anosov_consistent
    );
    Ok(())
}
