//! Pestov's identity, α-control and the gap inequality for `Q`.
//!
//! For `G = X + λV` and `𝕂 = K + X⊥λ + λ²`:
//!
//! ```text
//! ‖VGu‖² = ‖GVu‖² − (𝕂Vu, Vu) + ‖Gu‖²
//! ```

use crate::error::{Error, Result};
use crate::fiber::{magnetic_curvature_function, random_fiber_function, FiberFunction, PhaseGrid, RandomFiberSpec};
use crate::report::{Check, ExperimentReport};
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PestovReport {
    /// `‖V(X+λV)u‖²`
    pub lhs: f64,
    /// `‖(X+λV)Vu‖²`, `−(𝕂Vu, Vu)`, `‖(X+λV)u‖²`
    pub rhs_terms: [f64; 3],
    pub relative_residual: f64,
    pub leakage: f64,
}

/// `(𝕂u, u)`.
pub fn curvature_form(u: &FiberFunction) -> Result<f64> {
    let k = magnetic_curvature_function(u.grid())?;
    Ok(k.multiply(u)?.inner_product(u)?.re)
}

pub fn pestov_check(u: &FiberFunction) -> Result<PestovReport> {
    let n = u.band_limit();
    if u.kmax() + 2 > n {
        return Err(Error::Precondition(format!(
            "Pestov check needs two degrees of headroom: degree {} with band limit {n}",
            u.kmax()
        )));
    }
    let gu = u.apply_generator()?;
    let vu = u.apply_v();
    let vgu = gu.apply_v();
    let gvu = vu.apply_generator()?;
    let lhs = vgu.l2_norm().powi(2);
    let rhs_terms = [gvu.l2_norm().powi(2), -curvature_form(&vu)?, gu.l2_norm().powi(2)];
    let rhs: f64 = rhs_terms.iter().sum();
    let leakage = [gu.leakage(), gvu.leakage(), vgu.leakage()].into_iter().fold(0.0, f64::max);
    Ok(PestovReport { lhs, rhs_terms, relative_residual: (lhs - rhs).abs() / lhs.max(1e-30), leakage })
}

/// `(‖Gu‖² − (𝕂u,u)) − α‖Gu‖²`.
pub fn alpha_controlled_margin(u: &FiberFunction, alpha: f64) -> Result<f64> {
    let g2 = u.apply_generator()?.l2_norm().powi(2);
    Ok(g2 - curvature_form(u)? - alpha * g2)
}

/// `(‖Gψ‖² − (𝕂ψ,ψ)) / (‖Gψ‖² + ‖ψ‖²)`.
pub fn alpha_quotient(psi: &FiberFunction) -> Result<f64> {
    let g2 = psi.apply_generator()?.l2_norm().powi(2);
    let n2 = psi.l2_norm().powi(2);
    Ok((g2 - curvature_form(psi)?) / (g2 + n2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Index of the minimising sample; 0 is the constant function.
    pub argmin: usize,
    pub sample_count: usize,
    pub family: String,
    pub violated: bool,
    pub max_quotient: f64,
}

/// Rayleigh-quotient estimate of the α-control constant: the minimum of
/// [`alpha_quotient`] over `ψ ≡ 1` and `sample_count` seeded random functions.
pub fn alpha_estimate(grid: &Arc<PhaseGrid>, sample_count: usize, spec: &RandomFiberSpec, seed: u64) -> Result<AlphaEstimate> {
    let one = FiberFunction::constant(grid, C::new(1.0, 0.0));
    let mut quotients = vec![alpha_quotient(&one)?];
    let random: Result<Vec<f64>> = (0..sample_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let psi = random_fiber_function(grid.model(), spec, &mut rng).sample(grid)?;
            alpha_quotient(&psi)
        })
        .collect();
    quotients.extend(random?);
    let (argmin, alpha) = quotients
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, q)| if q < best.1 { (i, q) } else { best });
    let max_quotient = quotients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AlphaEstimate {
        alpha,
        argmin,
        sample_count: quotients.len(),
        family: format!(
            "constant plus {sample_count} random functions, degrees {}..={}, base band {}, seed {seed}",
            spec.min_degree, spec.max_degree, spec.base_band
        ),
        violated: alpha < 0.0,
        max_quotient,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub m: i32,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `‖v‖², ‖w‖², ‖η₋u_m‖² + ‖η₊u_{−m}‖²`, the `(1 − m²)` group and the `α` group.
    pub terms: [f64; 5],
    pub leakage: f64,
}

impl GapReport {
    pub fn to_report(&self, tolerance: f64) -> ExperimentReport {
        let mut r = ExperimentReport::new("gap_inequality");
        r.metric("m", self.m)
            .metric("alpha", self.alpha)
            .metric("lhs", self.lhs)
            .metric("rhs", self.rhs)
            .metric("terms", self.terms)
            .record_leakage(self.leakage)
            .check(Check::at_least("gap_slack", "lhs − rhs of the Q lower bound", self.slack, -tolerance));
        r
    }
}

fn sq(u: &FiberFunction) -> f64 {
    u.l2_norm().powi(2)
}

/// Both sides of the lower bound for `‖Qu‖²` on `u ∈ ⊕_{|k|≥m} Ω_k`.
pub fn gap_inequality_check(u: &FiberFunction, m: i32, alpha: f64) -> Result<GapReport> {
    if m < 2 {
        return Err(Error::Precondition(format!("gap inequality needs m ≥ 2, got {m}")));
    }
    let low = u.project_t(m - 1);
    if u.sub(&low).l2_norm() > 1e-14 * u.l2_norm().max(1e-300) {
        return Err(Error::Precondition(format!("u has mass in degrees |k| < {m}")));
    }
    let g = u.grid().clone();
    let lam = &g.lambda;
    let gu = u.apply_generator()?;
    let vu = u.apply_v();
    let gvu = vu.apply_generator()?;
    let qu = gu.apply_v().project_t(m);
    let v = gu.project_t(m);
    let w = gvu.project_t(m);

    let (plus, minus) = u.ladder()?;
    let pick = |f: &FiberFunction, k: i32| f.component(k);
    // η₋ u_m lives in degree m−1, η₊ u_{−m} in degree −(m−1)
    let eta_m_u_m = pick(&minus, m - 1);
    let eta_p_u_neg = pick(&plus, -(m - 1));
    // η₋ u_{m+1} in degree m, η₊ u_{−(m+1)} in degree −m; separate the
    // contributions from the other source degrees by filtering the input
    let only = |k: i32| -> Result<(FiberFunction, FiberFunction)> { u.component(k).ladder() };
    let (_, minus_m1) = only(m + 1)?;
    let (plus_m1, _) = only(-(m + 1))?;
    let eta_m_u_m1 = pick(&minus_m1, m);
    let eta_p_u_negm1 = pick(&plus_m1, -m);
    let lam_times = |k: i32, c: C| -> FiberFunction {
        let mut out = u.component(k);
        for (d, l) in out.mode_mut(k).iter_mut().zip(lam) {
            *d *= c * *l;
        }
        out
    };
    let mf = m as f64;
    let i = C::new(0.0, 1.0);
    let a1 = lam_times(m, i * mf).add(&eta_m_u_m1);
    let a2 = lam_times(-m, -i * mf).add(&eta_p_u_negm1);
    let b1 = lam_times(m, C::new(-mf * mf, 0.0)).add(&eta_m_u_m1.scale(i * (mf + 1.0)));
    let b2 = lam_times(-m, C::new(-mf * mf, 0.0)).add(&eta_p_u_negm1.scale(-i * (mf + 1.0)));

    let t_v = sq(&v);
    let t_w = sq(&w);
    let t_eta = sq(&eta_m_u_m) + sq(&eta_p_u_neg);
    let t_mid = sq(&a1) + sq(&a2);
    let t_alpha = sq(&b1) + sq(&b2);
    let lhs = sq(&qu);
    let rhs = t_v + alpha * t_w + (1.0 - (mf - 1.0).powi(2) + alpha * mf * mf) * t_eta + (1.0 - mf * mf) * t_mid + alpha * t_alpha;
    let leakage = [gu.leakage(), gvu.leakage(), qu.leakage()].into_iter().fold(0.0, f64::max);
    Ok(GapReport { m, alpha, lhs, rhs, slack: lhs - rhs, terms: [t_v, t_w, t_eta, t_mid, t_alpha], leakage })
}

/// `‖u‖_{H¹} / ‖Pu‖` for `⟨u, 1⟩ = 0`; infinite when `Pu` vanishes.
pub fn p_control_ratio(u: &FiberFunction) -> Result<f64> {
    let mean = u.mean_integral().norm();
    let scale = u.l2_norm() * u.grid().surface().phase_volume().sqrt();
    if mean > 1e-10 * scale.max(1e-300) {
        return Err(Error::Precondition(format!("⟨u, 1⟩ = {mean:.3e} is not zero")));
    }
    let p = u.apply_p()?.l2_norm();
    Ok(if p == 0.0 { f64::INFINITY } else { u.h1_norm()? / p })
}

/// `‖u‖_{H¹} / ‖Qu‖` with `Q` at threshold 1, for `u_0 = 0`.
pub fn q_control_ratio(u: &FiberFunction) -> Result<f64> {
    if u.component(0).l2_norm() > 1e-14 * u.l2_norm().max(1e-300) {
        return Err(Error::Precondition("u has a degree-0 component".into()));
    }
    let q = u.apply_q(1)?.l2_norm();
    Ok(if q == 0.0 { f64::INFINITY } else { u.h1_norm()? / q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::AnalyticFiberFunction;
    use crate::geometry::{BaseFunction, MagneticSurface, RealTerm};
    use std::f64::consts::{PI, TAU};

    fn torus() -> MagneticSurface {
        let phi = BaseFunction::from_real_terms(&[
            RealTerm { n: [1, 0], cos: 0.05, sin: 0.02 },
            RealTerm { n: [1, -1], cos: 0.03, sin: 0.0 },
        ]);
        let lam = BaseFunction::from_real_terms(&[
            RealTerm { n: [0, 0], cos: 0.5, sin: 0.0 },
            RealTerm { n: [0, 1], cos: 0.2, sin: -0.1 },
        ]);
        MagneticSurface::torus(phi, lam).unwrap()
    }

    fn grid(s: MagneticSurface) -> Arc<PhaseGrid> {
        let n = if s.model() == crate::geometry::SurfaceModel::BolzaOctagon { 96 } else { 48 };
        PhaseGrid::new(Arc::new(s), n, 10).unwrap()
    }

    fn random(g: &Arc<PhaseGrid>, seed: u64, spec: RandomFiberSpec) -> (AnalyticFiberFunction, FiberFunction) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_fiber_function(g.model(), &spec, &mut rng);
        let u = a.sample(g).unwrap();
        (a, u)
    }

    #[test]
    fn constant_has_all_terms_zero() {
        let g = grid(MagneticSurface::bolza(0.3));
        let r = pestov_check(&FiberFunction::constant(&g, C::new(2.0, 0.0))).unwrap();
        assert!(r.lhs.abs() < 1e-20 && r.rhs_terms.iter().all(|t| t.abs() < 1e-20));
        assert_eq!(r.relative_residual, 0.0);
    }

    #[test]
    fn degree_zero_input_kills_middle_terms() {
        let g = grid(torus());
        let (_, u) = random(&g, 3, RandomFiberSpec { max_degree: 0, ..Default::default() });
        let r = pestov_check(&u).unwrap();
        assert_eq!(r.rhs_terms[0], 0.0);
        assert_eq!(r.rhs_terms[1], 0.0);
        assert!((r.lhs - r.rhs_terms[2]).abs() < 1e-10 * r.lhs);
    }

    #[test]
    fn identity_holds_on_both_models() {
        for s in [torus(), MagneticSurface::bolza(0.0), MagneticSurface::bolza(0.6)] {
            let g = grid(s);
            for seed in 0..4 {
                let (_, u) = random(&g, seed, RandomFiberSpec::default());
                let r = pestov_check(&u).unwrap();
                assert!(r.relative_residual < 1e-10, "{:?} {}", g.model(), r.relative_residual);
            }
        }
    }

    #[test]
    fn curvature_term_matches_pointwise_quadrature() {
        // −(𝕂Vu, Vu) by dense quadrature over the base and the fiber with 𝕂
        // from the analytic surface formula
        let s = torus();
        let g = grid(s.clone());
        let (a, u) = random(&g, 17, RandomFiberSpec { max_degree: 3, ..Default::default() });
        let spectral = curvature_form(&u.apply_v()).unwrap();
        let (nb, nt) = (64, 24);
        let mut dense = 0.0;
        for j in 0..nb {
            for i in 0..nb {
                let (x, y) = ((i as f64 + 0.25) / nb as f64, (j as f64 + 0.5) / nb as f64);
                let w = s.metric_factor(x, y).unwrap() / (nb * nb) as f64 * TAU / nt as f64;
                for t in 0..nt {
                    let th = TAU * t as f64 / nt as f64;
                    let vu: C = a
                        .modes
                        .iter()
                        .map(|(k, f)| f.value(x, y) * C::from_polar(1.0, *k as f64 * th) * C::new(0.0, *k as f64))
                        .sum();
                    let kk = s.magnetic_curvature(crate::geometry::PhasePoint::new(x, y, th)).unwrap();
                    dense += kk * vu.norm_sqr() * w;
                }
            }
        }
        assert!((spectral - dense).abs() < 1e-8 * dense.abs().max(1.0), "{spectral} vs {dense}");
    }

    #[test]
    fn constant_margin_on_hyperbolic_surface() {
        let g = grid(MagneticSurface::bolza(0.0));
        let one = FiberFunction::constant(&g, C::new(1.0, 0.0));
        for alpha in [0.0, 0.3, 1.0] {
            let m = alpha_controlled_margin(&one, alpha).unwrap();
            assert!((m - 8.0 * PI * PI).abs() < 1e-8);
        }
    }

    #[test]
    fn alpha_estimates_have_the_expected_sign() {
        let spec = RandomFiberSpec { max_degree: 3, ..Default::default() };
        let b = alpha_estimate(&grid(MagneticSurface::bolza(0.0)), 6, &spec, 1).unwrap();
        assert!(b.alpha > 0.0 && b.alpha <= 1.0 + 1e-12 && !b.violated);
        let c = 0.4;
        let b = alpha_estimate(&grid(MagneticSurface::bolza(c)), 6, &spec, 1).unwrap();
        assert!(b.alpha <= 1.0 - c * c + 1e-10);
        let t = alpha_estimate(&grid(MagneticSurface::flat_torus(1.0)), 4, &spec, 1).unwrap();
        assert!(t.violated && (t.alpha - -1.0).abs() < 1e-9 && t.argmin == 0);
    }

    #[test]
    fn margin_is_nonnegative_at_estimated_alpha() {
        let g = grid(MagneticSurface::bolza(0.3));
        let spec = RandomFiberSpec { max_degree: 3, ..Default::default() };
        let est = alpha_estimate(&g, 8, &spec, 5).unwrap();
        for seed in 100..106 {
            let (_, u) = random(&g, seed, spec);
            assert!(alpha_controlled_margin(&u, est.alpha).unwrap() >= 0.0);
        }
    }

    #[test]
    fn gap_slack_equals_alpha_margin_of_vu() {
        // every step of the bound is an orthogonal expansion except the
        // α-control applied to Vu, so the slack is exactly that margin
        for s in [MagneticSurface::bolza(0.2), torus()] {
            let g = grid(s);
            let spec = RandomFiberSpec { min_degree: 2, max_degree: 5, ..Default::default() };
            let (_, u) = random(&g, 23, spec);
            let alpha = 0.1;
            let r = gap_inequality_check(&u, 2, alpha).unwrap();
            let margin = alpha_controlled_margin(&u.apply_v(), alpha).unwrap();
            assert!((r.slack - margin).abs() < 1e-9 * r.lhs, "{} vs {margin}", r.slack);
        }
    }

    #[test]
    fn gap_for_zero_and_pure_inputs() {
        let g = grid(MagneticSurface::bolza(0.0));
        let zero = FiberFunction::zeros(&g, 4).unwrap();
        let r = gap_inequality_check(&zero, 2, 0.5).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let (_, u) = random(&g, 29, RandomFiberSpec { min_degree: 2, max_degree: 2, ..Default::default() });
        let pure = u.component(2);
        let r = gap_inequality_check(&pure, 2, 0.5).unwrap();
        assert!(r.slack >= 0.0);
        let (_, low) = random(&g, 30, RandomFiberSpec { min_degree: 1, max_degree: 3, ..Default::default() });
        assert!(gap_inequality_check(&low, 2, 0.5).is_err());
    }

    #[test]
    fn control_ratios() {
        let g = grid(MagneticSurface::bolza(0.0));
        let (_, u) = random(&g, 37, RandomFiberSpec { min_degree: 1, max_degree: 1, ..Default::default() });
        let r = p_control_ratio(&u).unwrap();
        assert!(r.is_finite() && r > 0.0);
        assert!(q_control_ratio(&u).unwrap().is_finite());
        let with_mean = u.add(&FiberFunction::constant(&g, C::new(1.0, 0.0)));
        assert!(matches!(p_control_ratio(&with_mean), Err(Error::Precondition(_))));
        assert!(q_control_ratio(&with_mean).is_err());
    }

    #[test]
    fn headroom_is_required() {
        let g = PhaseGrid::new(Arc::new(torus()), 32, 4).unwrap();
        let (_, u) = random(&g, 1, RandomFiberSpec { max_degree: 3, ..Default::default() });
        assert!(pestov_check(&u).is_err());
    }
}
