//! Solutions of the Riccati equation `(X + λV)r + r² + 𝕂 = 0` along a
//! trajectory.
//!
//! Along an orbit the equation is the scalar ODE `ṙ = −r² − 𝕂(z(t))`. The
//! larger solution attracts forward in time and the smaller one backward, so
//! each is obtained by integrating through a burn-in interval in the
//! corresponding direction. The base trajectory is recorded once and both
//! solutions are integrated along the same dense path; flowing twice would let
//! the two copies drift apart at the Lyapunov rate.

use super::flow::{FlowField, Trajectory};
use super::ode::{integrate, Control, OdeSystem, Tolerances};
use crate::error::{Error, Result};
use crate::geometry::{MagneticSurface, PhasePoint};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiOptions {
    pub burn_in: f64,
    pub sample_dt: f64,
    pub rtol: f64,
    pub atol: f64,
    /// `|r|` beyond which the solution is declared to blow up.
    pub blow_up: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self { burn_in: 20.0, sample_dt: 0.05, rtol: 1e-12, atol: 1e-12, blow_up: 1e8 }
    }
}

/// The two Riccati solutions sampled along a trajectory segment `[0, L]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiccatiPair {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// Forward-attracting (larger) solution.
    pub r_plus: Vec<f64>,
    /// Backward-attracting (smaller) solution.
    pub r_minus: Vec<f64>,
    /// `min (r⁺ − r⁻)` over the samples.
    pub separation: f64,
    /// Largest `|ṙ + r² + 𝕂|` over both solutions and all samples.
    pub max_residual: f64,
}

/// A trajectory through `z0` recorded on `[−back, forward]`.
struct Path {
    fwd: Trajectory,
    bwd: Trajectory,
}

impl Path {
    fn point(&self, t: f64) -> PhasePoint {
        if t >= 0.0 {
            self.fwd.point_at(t)
        } else {
            self.bwd.point_at(t)
        }
    }
}

struct Scalar<'a> {
    path: &'a Path,
    surface: &'a MagneticSurface,
}

impl OdeSystem for Scalar<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let k = self.surface.magnetic_curvature(self.path.point(t)).unwrap_or(f64::NAN);
        dy[0] = -y[0] * y[0] - k;
    }
}

/// Solve for `r±` along the trajectory of `z0` over `[0, length]`.
pub fn riccati_solve(field: &FlowField, z0: PhasePoint, length: f64, opts: &RiccatiOptions) -> Result<RiccatiPair> {
    if field.forcing_strength() != 0.0 {
        return Err(Error::Precondition("the Riccati equation is posed for the unperturbed flow".into()));
    }
    if !(length > 0.0) || !(opts.burn_in >= 0.0) || !(opts.sample_dt > 0.0) {
        return Err(Error::Precondition("length, burn-in and sample spacing must be positive".into()));
    }
    let surface = field.surface().as_ref();
    let flow_tol = Tolerances::new(1e-12, 1e-12);
    let path = Path {
        fwd: field.trajectory(z0, length + opts.burn_in, &flow_tol)?,
        bwd: field.trajectory(z0, -opts.burn_in.max(1e-3), &flow_tol)?,
    };
    let sys = Scalar { path: &path, surface };
    let n = (length / opts.sample_dt).round() as usize + 1;
    let times: Vec<f64> = (0..n).map(|j| (j as f64 * opts.sample_dt).min(length)).collect();
    // a constant solution of r² = −𝕂 when 𝕂 is constant; a bounded start otherwise
    let r0 = surface.max_negative_magnetic_curvature()?.max(0.0).sqrt();
    let tol = Tolerances::new(opts.rtol, opts.atol);

    let run = |from: f64, to: f64, r_init: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut vals = vec![f64::NAN; n];
        let mut resid = vec![f64::NAN; n];
        let mut y = [r_init];
        integrate(&sys, &tol, from, &mut y, to, |step, y| {
            if !(y[0].abs() < opts.blow_up) {
                return Err(Error::RiccatiBlowUp(step.t1()));
            }
            let (lo, hi) = if step.h > 0.0 { (step.t0, step.t1()) } else { (step.t1(), step.t0) };
            let first = times.partition_point(|&t| t < lo);
            for j in first..n {
                let t = times[j];
                if t > hi {
                    break;
                }
                let r = step.component(0, t);
                let k = surface.magnetic_curvature(path.point(t))?;
                vals[j] = r;
                resid[j] = (step.derivative(0, t) + r * r + k).abs();
            }
            Ok(Control::Continue)
        })?;
        Ok((vals, resid))
    };
    let (r_plus, res_plus) = run(-opts.burn_in, length, r0)?;
    let (r_minus, res_minus) = run(length + opts.burn_in, 0.0, -r0)?;
    if r_plus.iter().chain(&r_minus).any(|v| !v.is_finite()) {
        return Err(Error::Integrator("Riccati samples incomplete".into()));
    }
    let separation = r_plus.iter().zip(&r_minus).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let max_residual = res_plus.iter().chain(&res_minus).cloned().fold(0.0, f64::max);
    Ok(RiccatiPair {
        points: times.iter().map(|&t| path.point(t)).collect(),
        times,
        r_plus,
        r_minus,
        separation,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BaseFunction, TrigTerm, Window};
    use num_complex::Complex64 as C;
    use std::sync::Arc;

    fn field(s: MagneticSurface) -> FlowField {
        FlowField::new(Arc::new(s))
    }

    #[test]
    fn bolza_geodesic_flow_gives_unit_solutions() {
        let p = riccati_solve(&field(MagneticSurface::bolza(0.0)), PhasePoint::new(0.1, 0.2, 0.3), 10.0, &RiccatiOptions::default()).unwrap();
        assert!(p.r_plus.iter().all(|r| (r - 1.0).abs() < 1e-6));
        assert!(p.r_minus.iter().all(|r| (r + 1.0).abs() < 1e-6));
        assert!((p.separation - 2.0).abs() < 1e-6 && p.max_residual < 1e-6);
    }

    #[test]
    fn flat_torus_is_degenerate() {
        let p = riccati_solve(&field(MagneticSurface::flat_torus(0.0)), PhasePoint::new(0.1, 0.2, 0.3), 10.0, &RiccatiOptions::default()).unwrap();
        assert!(p.separation.abs() < 1e-3);
    }

    #[test]
    fn constant_intensity_shifts_solutions() {
        let p = riccati_solve(&field(MagneticSurface::bolza(0.3)), PhasePoint::new(-0.2, 0.1, 2.0), 10.0, &RiccatiOptions::default()).unwrap();
        let e = (1.0f64 - 0.09).sqrt();
        assert!((p.separation - 2.0 * e).abs() < 1e-6 && p.max_residual < 1e-6);
    }

    /// With a bump in `λ` the solutions vary along the orbit; the residual is
    /// then a genuine check, and the forward limit does not depend on the
    /// initial value once the burn-in has passed.
    #[test]
    fn variable_intensity_attracts() {
        let bump = BaseFunction::windowed(
            vec![TrigTerm { n: [0, 0], c: C::new(0.25, 0.0) }],
            1.0,
            [0.0, 0.0],
            Window::Bump { center: [0.05, 0.0], radius: 0.4 },
        );
        let s = MagneticSurface::bolza_with_variation(0.2, bump).unwrap();
        let f = field(s);
        let z0 = PhasePoint::new(0.3, -0.1, 0.7);
        let p = riccati_solve(&f, z0, 12.0, &RiccatiOptions::default()).unwrap();
        assert!(p.separation > 0.5, "{}", p.separation);
        assert!(p.max_residual < 1e-6, "{}", p.max_residual);
        let spread = p.r_plus.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - p.r_plus.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 1e-3, "solution should vary along the orbit");
        let q = riccati_solve(&f, z0, 12.0, &RiccatiOptions { burn_in: 30.0, ..Default::default() }).unwrap();
        for (a, b) in p.r_plus.iter().zip(&q.r_plus) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn positive_curvature_blows_up() {
        let f = field(MagneticSurface::flat_torus(1.0));
        let err = riccati_solve(&f, PhasePoint::new(0.1, 0.2, 0.3), 10.0, &RiccatiOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RiccatiBlowUp(_)));
    }
}
