//! Primitive of `f` along a long trajectory, compared at near-recurrences.
//!
//! If `f = (X + λV)u` then `U(t) = ∫₀ᵗ f = u(z(t)) − u(z(0))`, so whenever the
//! trajectory returns close to an earlier point the two values of `U` differ
//! by `O(δ)` regardless of the time elapsed. Otherwise the difference grows
//! with the gap: linearly for a nonzero mean, diffusively for a mean-zero
//! function that is not a coboundary. The check reports the spread and how
//! it scales with the time gap.

use super::ray::PhaseFunction;
use crate::dynamics::{phase_distance, FlowField, Tolerances};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, PhasePoint};
use crate::quadrature::gauss_legendre;
use crate::report::{Check, ExperimentReport};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LivsicOptions {
    pub length: f64,
    pub sample_dt: f64,
    /// Phase-space distance defining a near-recurrence.
    pub delta: f64,
    /// Smallest time gap between the two visits of a recurrence.
    pub min_gap: f64,
    pub min_pairs: usize,
    /// Largest ratio of the mean spread at long gaps to that at short gaps
    /// still read as gap-independent.
    pub max_growth: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for LivsicOptions {
    fn default() -> Self {
        Self { length: 2000.0, sample_dt: 0.02, delta: 1e-2, min_gap: 2.0, min_pairs: 40, max_growth: 1.5, rtol: 1e-10, atol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LivsicSummary {
    pub pairs: usize,
    pub max_spread: f64,
    pub rms_spread: f64,
    /// Mean spread over the longest-gap quarter of the pairs divided by that
    /// over the shortest-gap quarter.
    pub growth_ratio: f64,
    pub coboundary_consistent: bool,
}

struct Sample {
    t: f64,
    p: PhasePoint,
    u: f64,
}

/// Build `U(t) = ∫₀ᵗ f` along the trajectory of `z0` and compare it at
/// near-recurrences.
pub fn livsic_primitive_check<F: PhaseFunction + ?Sized>(
    f: &F,
    field: &FlowField,
    z0: PhasePoint,
    opts: &LivsicOptions,
) -> Result<(ExperimentReport, LivsicSummary)> {
    if !(opts.delta > 0.0 && opts.sample_dt > 0.0 && opts.length > opts.min_gap) {
        return Err(Error::Precondition("livsic check needs positive δ and spacing and length beyond the gap".into()));
    }
    let (x5, w5) = gauss_legendre(5);
    let gl = |a: f64, b: f64, eval: &dyn Fn(f64) -> C| -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        x5.iter().zip(&w5).map(|(x, w)| eval(m + h * x).re * w * h).sum()
    };
    let tol = Tolerances::new(opts.rtol, opts.atol);
    let mut samples: Vec<Sample> = Vec::with_capacity((opts.length / opts.sample_dt) as usize + 2);
    let mut acc = 0.0;
    let mut next = 0.0;
    field.visit(z0, opts.length, &tol, |step| {
        let (t0, t1) = (step.t0, step.t1());
        let point = |t: f64| PhasePoint::new(step.component(0, t), step.component(1, t), step.component(2, t));
        let eval = |t: f64| f.value_at(point(t));
        while next <= t1 && next <= opts.length {
            let partial = if next > t0 { gl(t0, next, &eval) } else { 0.0 };
            samples.push(Sample { t: next, p: point(next), u: acc + partial });
            next += opts.sample_dt;
        }
        acc += gl(t0, t1, &eval);
        Ok(())
    })?;

    // uniform angle cells of width at least δ so that neighbours cover δ
    let angle_cells = ((std::f64::consts::TAU / opts.delta).floor() as i64).max(1);
    let angle_width = std::f64::consts::TAU / angle_cells as f64;
    let cell = |p: &PhasePoint| {
        let d = opts.delta;
        let a = ((wrap_angle(p.theta) + std::f64::consts::PI) / angle_width).floor() as i64;
        ((p.x / d).floor() as i64, (p.y / d).floor() as i64, a.rem_euclid(angle_cells))
    };
    let mut index: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let gap_samples = (opts.min_gap / opts.sample_dt).ceil() as usize;
    for (j, s) in samples.iter().enumerate() {
        // only earlier samples at least min_gap back are eligible
        if j >= gap_samples {
            let i = j - gap_samples;
            index.entry(cell(&samples[i].p)).or_default().push(i);
        }
        let (cx, cy, ct) = cell(&s.p);
        let mut angles: Vec<i64> = (-1..=1).map(|d| (ct + d).rem_euclid(angle_cells)).collect();
        angles.sort_unstable();
        angles.dedup();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for &a in &angles {
                    let key = (cx + dx, cy + dy, a);
                    let Some(list) = index.get(&key) else { continue };
                    for &i in list {
                        let e = &samples[i];
                        if phase_distance(e.p, s.p) < opts.delta {
                            pairs.push((s.t - e.t, (s.u - e.u).abs()));
                        }
                    }
                }
            }
        }
    }
    if pairs.len() < opts.min_pairs {
        return Err(Error::Statistics(format!(
            "only {} recurrences at δ = {} (need {})",
            pairs.len(),
            opts.delta,
            opts.min_pairs
        )));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let q = pairs.len() / 4;
    let mean = |s: &[(f64, f64)]| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64;
    let short = mean(&pairs[..q.max(1)]);
    let long = mean(&pairs[pairs.len() - q.max(1)..]);
    let growth_ratio = if short > 0.0 { long / short } else if long > 0.0 { f64::INFINITY } else { 1.0 };
    let max_spread = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let rms_spread = (pairs.iter().map(|p| p.1 * p.1).sum::<f64>() / pairs.len() as f64).sqrt();
    let summary = LivsicSummary {
        pairs: pairs.len(),
        max_spread,
        rms_spread,
        growth_ratio,
        coboundary_consistent: growth_ratio < opts.max_growth,
    };
    let mut rep = ExperimentReport::new("livsic_primitive");
    rep.check(Check::at_least("recurrences", "near-recurrences found at δ", pairs.len() as f64, opts.min_pairs as f64));
    rep.metric("pairs", summary.pairs)
        .metric("delta", opts.delta)
        .metric("max_spread", max_spread)
        .metric("rms_spread", rms_spread)
        .metric("spread_over_delta", max_spread / opts.delta)
        .metric("growth_ratio", growth_ratio)
        .metric("coboundary_consistent", summary.coboundary_consistent);
    Ok((rep, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{random_fiber_function, FiberFunction, PhaseGrid, RandomFiberSpec};
    use crate::geometry::MagneticSurface;
    use crate::tomography::make_potential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup() -> (Arc<PhaseGrid>, FlowField) {
        let s = Arc::new(MagneticSurface::bolza(0.2));
        (PhaseGrid::new(s.clone(), 96, 4).unwrap(), FlowField::new(s))
    }

    #[test]
    fn coboundary_constant_and_non_potential() {
        let (grid, field) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let spec = RandomFiberSpec { max_degree: 1, real: true, ..Default::default() };
        let a = random_fiber_function(grid.model(), &spec, &mut rng).sample(&grid).unwrap();
        let z0 = PhasePoint::new(0.1, -0.05, 0.4);
        let opts = LivsicOptions::default();

        let f = make_potential(&a).unwrap().evaluator();
        let (rep, cob) = livsic_primitive_check(&f, &field, z0, &opts).unwrap();
        assert!(rep.passed());
        assert!(cob.coboundary_consistent, "{cob:?}");

        let one = |_: PhasePoint| C::new(1.0, 0.0);
        let (_, s1) = livsic_primitive_check(&one, &field, z0, &opts).unwrap();
        assert!(!s1.coboundary_consistent && s1.max_spread > opts.min_gap, "{s1:?}");
        assert!(s1.max_spread > 100.0 * cob.max_spread);

        // a degree-2 function has zero mean but is not a potential
        let q = random_fiber_function(grid.model(), &RandomFiberSpec { min_degree: 2, max_degree: 2, real: true, ..Default::default() }, &mut rng)
            .sample(&grid)
            .unwrap();
        assert!(q.mean_integral().norm() < 1e-12);
        let (_, s2) = livsic_primitive_check(&q.evaluator(), &field, z0, &opts).unwrap();
        assert!(!s2.coboundary_consistent, "{s2:?}");
        let _ = FiberFunction::constant(&grid, C::new(0.0, 0.0));
    }

    #[test]
    fn too_few_recurrences_is_an_error() {
        let (_, field) = setup();
        let one = |_: PhasePoint| C::new(1.0, 0.0);
        let opts = LivsicOptions { length: 20.0, delta: 1e-4, ..Default::default() };
        assert!(matches!(livsic_primitive_check(&one, &field, PhasePoint::new(0.0, 0.0, 0.0), &opts), Err(Error::Statistics(_))));
    }
}
