//! Entropy production of the thermostat perturbation `λ + s·q̂` on the Bolza
//! surface, compared at second order with the variance of `V(q̂)`.
//!
//! `cargo run --release --example entropy_production [length] [samples]`

use magtomo::dynamics::FlowField;
use magtomo::entropy::{entropy_production_curve, second_derivative_check, variance, CorrelationOptions, DivergenceDensity, EntropyOptions, SecondDerivativeOptions};
use magtomo::geometry::MagneticSurface;
use magtomo::tomography::bump_tensor;
use std::sync::Arc;

fn main() -> magtomo::Result<()> {
    let mut args = std::env::args().skip(1).map(|v| v.parse::<f64>().ok());
    let length = args.next().flatten().unwrap_or(2000.0);
    let samples = args.next().flatten().unwrap_or(2000.0) as usize;
    let surface = Arc::new(MagneticSurface::bolza(0.2));
    let q = bump_tensor([12.0, 7.2, -12.0], 1, 0.6);

    let curve = entropy_production_curve(&q, &surface, &EntropyOptions { length, ..Default::default() })?;
    for p in &curve {
        println!("s = {:+.3}  e(s) = {:.6} ± {:.6}", p.s, p.production, p.stderr);
    }
    let field = FlowField::new(surface.clone());
    let opts = CorrelationOptions { samples, ..Default::default() };
    let var = variance(&DivergenceDensity::new(&q, 1.0, surface)?, &field, &opts)?;
    println!("Var = {:.4} ± {:.4} (σ(0) = {:.4}, decay rate {:.3})", var.value, var.stderr, var.correlation.values[0], var.decay_rate);
    let (_, d) = second_derivative_check(&curve, &var, &SecondDerivativeOptions::default())?;
    println!(
        "e'(0) = {:+.4} ± {:.4}, e''(0) = {:.4} ± {:.4}, relative difference {:.1}% ± {:.1}%",
        d.first_derivative,
        d.first_stderr,
        d.second_derivative,
        d.second_stderr,
        100.0 * d.relative_error,
        100.0 * d.relative_stderr
    );
    Ok(())
}
