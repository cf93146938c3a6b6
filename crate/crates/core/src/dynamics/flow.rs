//! The magnetic vector field `X + λV` in chart coordinates and its flow.
//!
//! In an isothermal chart the unit tangent bundle is coordinatized by
//! `(x, y, θ)` with `v = e^{-φ}(cos θ, sin θ)`, and the flow reads
//!
//! ```text
//! ẋ = e^{-φ} cos θ,   ẏ = e^{-φ} sin θ,
//! θ̇ = e^{-φ}(cos θ φ_y − sin θ φ_x) + Λ(x, y, θ),
//! ```
//!
//! with `Λ = λ` for the magnetic flow and `Λ = λ + s q̂` for a thermostat
//! perturbation.

use super::ode::{integrate, Control, DenseStep, OdeSystem, Stats, Tolerances};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Deck, MagneticSurface, PhasePoint, SurfaceModel};
use std::fmt::Debug;
use std::sync::Arc;

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

pub fn mat3_det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// A θ-dependent addition to the magnetic intensity, evaluated in the chart
/// of the fundamental domain.
pub trait Forcing: Send + Sync + Debug {
    /// Value and gradient `(∂x, ∂y, ∂θ)`.
    fn jet(&self, p: PhasePoint) -> (f64, [f64; 3]);
}

#[derive(Clone, Debug)]
pub struct FlowField {
    surface: Arc<MagneticSurface>,
    forcing: Option<(f64, Arc<dyn Forcing>)>,
}

/// Auxiliary equations integrated alongside the base flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Plain,
    /// 3×3 derivative of the flow map, row major.
    Tangent,
}

struct System<'a> {
    field: &'a FlowField,
    mode: Mode,
}

impl OdeSystem for System<'_> {
    fn dim(&self) -> usize {
        match self.mode {
            Mode::Plain => 3,
            Mode::Tangent => 12,
        }
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let p = PhasePoint::new(y[0], y[1], y[2]);
        if !self.field.surface.in_chart(p.x, p.y) {
            dy.fill(f64::NAN);
            return;
        }
        match self.mode {
            Mode::Plain => dy[..3].copy_from_slice(&self.field.velocity(p)),
            Mode::Tangent => {
                let (v, a) = self.field.velocity_and_jacobian(p);
                dy[..3].copy_from_slice(&v);
                for i in 0..3 {
                    for j in 0..3 {
                        dy[3 + 3 * i + j] = (0..3).map(|k| a[i][k] * y[3 + 3 * k + j]).sum();
                    }
                }
            }
        }
    }

    fn magnitude(&self, i: usize, y: f64) -> f64 {
        // positions live in a bounded chart and angles carry absolute error
        if i < 3 {
            1.0
        } else {
            y.abs()
        }
    }
}

/// One accepted integration step restricted to `(x, y, θ)`, expressed in the
/// chart of the fundamental-domain copy the step started in.
#[derive(Clone, Debug)]
pub struct Segment {
    pub dense: DenseStep,
    /// Index into [`Trajectory::decks`].
    pub deck_index: usize,
}

impl Segment {
    pub fn t0(&self) -> f64 {
        self.dense.t0
    }

    pub fn t1(&self) -> f64 {
        self.dense.t1()
    }

    pub fn point(&self, t: f64) -> PhasePoint {
        PhasePoint::new(self.dense.component(0, t), self.dense.component(1, t), self.dense.component(2, t))
    }
}

/// A flowed trajectory with its deck bookkeeping.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub start: PhasePoint,
    pub duration: f64,
    /// Endpoint in the fundamental domain.
    pub end: PhasePoint,
    /// Cumulative deck transformations; `decks[i]` maps the lifted curve to
    /// the chart used by segments with `deck_index == i`. The last entry maps
    /// the lifted endpoint to `end`.
    pub decks: Vec<Deck>,
    pub segments: Vec<Segment>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn final_deck(&self) -> &Deck {
        self.decks.last().expect("at least the identity deck")
    }

    fn locate(&self, t: f64) -> &Segment {
        let i = if self.duration >= 0.0 {
            self.segments.partition_point(|s| s.t1() < t)
        } else {
            self.segments.partition_point(|s| s.t1() > t)
        };
        &self.segments[i.min(self.segments.len() - 1)]
    }

    /// Point at time `t` in the chart of the domain copy it lies in.
    pub fn point_at(&self, t: f64) -> PhasePoint {
        self.locate(t).point(t)
    }

    /// Magnetic curvature `𝕂` along the trajectory at time `t`.
    pub fn magnetic_curvature_at(&self, surface: &MagneticSurface, t: f64) -> Result<f64> {
        surface.magnetic_curvature(self.point_at(t))
    }

    /// `n` equally spaced samples over `[0, duration)` with the deck word
    /// accumulated up to each sample.
    pub fn samples(&self, n: usize) -> Vec<(f64, PhasePoint, String)> {
        (0..n)
            .map(|i| {
                let t = self.duration * i as f64 / n as f64;
                let s = self.locate(t);
                (t, s.point(t), self.decks[s.deck_index].word_string())
            })
            .collect()
    }
}

impl FlowField {
    pub fn new(surface: Arc<MagneticSurface>) -> Self {
        Self { surface, forcing: None }
    }

    /// Adds `s · q̂` to the intensity.
    pub fn with_forcing(mut self, s: f64, forcing: Arc<dyn Forcing>) -> Self {
        self.forcing = Some((s, forcing));
        self
    }

    pub fn surface(&self) -> &Arc<MagneticSurface> {
        &self.surface
    }

    pub fn forcing_strength(&self) -> f64 {
        self.forcing.as_ref().map_or(0.0, |f| f.0)
    }

    /// `e^{-φ}`, `e^{-φ}∇φ` and the second-order data needed by the Jacobian.
    fn frame(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 3]) {
        match self.surface.model() {
            SurfaceModel::BolzaOctagon => {
                // e^{-φ} = (1 − r²)/2 and e^{-φ}∇φ = (x, y)
                let e = 0.5 * (1.0 - x * x - y * y);
                (e, [x, y], [0.0; 3])
            }
            SurfaceModel::FlatTorusConformal => {
                let j = self.surface.phi_jet(x, y).expect("torus chart is global");
                let e = (-j.phi).exp();
                (e, [e * j.grad[0], e * j.grad[1]], [e * j.hess[0], e * j.hess[1], e * j.hess[2]])
            }
        }
    }

    fn intensity(&self, p: PhasePoint) -> (f64, [f64; 3]) {
        let l = self.surface.lambda(p.x, p.y);
        let g = if self.surface.has_constant_lambda() { [0.0; 2] } else { self.surface.lambda_gradient(p.x, p.y) };
        let mut out = (l, [g[0], g[1], 0.0]);
        if let Some((s, f)) = &self.forcing {
            if *s != 0.0 {
                let (v, d) = f.jet(p);
                out.0 += s * v;
                for i in 0..3 {
                    out.1[i] += s * d[i];
                }
            }
        }
        out
    }

    /// The vector field at `p`.
    pub fn velocity(&self, p: PhasePoint) -> [f64; 3] {
        let (e, ep, _) = self.frame(p.x, p.y);
        let (s, c) = p.theta.sin_cos();
        let (l, _) = self.intensity(p);
        [e * c, e * s, c * ep[1] - s * ep[0] + l]
    }

    /// The vector field and its Jacobian at `p`.
    pub fn velocity_and_jacobian(&self, p: PhasePoint) -> ([f64; 3], Mat3) {
        let (e, ep, eh) = self.frame(p.x, p.y);
        let (s, c) = p.theta.sin_cos();
        let (l, dl) = self.intensity(p);
        let v = [e * c, e * s, c * ep[1] - s * ep[0] + l];
        // ∂(e^{-φ}φ_i)/∂x_j = e^{-φ}(φ_ij − φ_i φ_j)
        let dep = match self.surface.model() {
            SurfaceModel::BolzaOctagon => [[1.0, 0.0], [0.0, 1.0]],
            SurfaceModel::FlatTorusConformal => {
                let (gx, gy) = (ep[0] / e, ep[1] / e);
                [[eh[0] - ep[0] * gx, eh[1] - ep[0] * gy], [eh[1] - ep[1] * gx, eh[2] - ep[1] * gy]]
            }
        };
        let a = [
            [-ep[0] * c, -ep[1] * c, -e * s],
            [-ep[0] * s, -ep[1] * s, e * c],
            [
                c * dep[1][0] - s * dep[0][0] + dl[0],
                c * dep[1][1] - s * dep[0][1] + dl[1],
                -s * ep[1] - c * ep[0] + dl[2],
            ],
        ];
        (v, a)
    }

    /// Riemannian speed `e^{φ}|(ẋ, ẏ)|` of a chart velocity.
    pub fn speed(&self, p: PhasePoint, dx: f64, dy: f64) -> f64 {
        let (e, _, _) = self.frame(p.x, p.y);
        dx.hypot(dy) / e
    }

    fn run<F>(&self, mode: Mode, state: &mut [f64], t: f64, tol: &Tolerances, mut on_segment: F) -> Result<(Vec<Deck>, Stats)>
    where
        F: FnMut(&DenseStep, usize) -> Result<()>,
    {
        let surface = &self.surface;
        let mut decks = vec![Deck::identity(surface.model())];
        let sys = System { field: self, mode };
        let stats = integrate(&sys, tol, 0.0, state, t, |step, y| {
            on_segment(step, decks.len() - 1)?;
            let p = PhasePoint::new(y[0], y[1], y[2]);
            if !p.x.is_finite() || !p.y.is_finite() || !p.theta.is_finite() {
                return Err(Error::Integrator("non-finite state".into()));
            }
            if surface.in_domain(p.x, p.y, 1e-12) {
                if p.theta.abs() > 64.0 {
                    y[2] = wrap_angle(p.theta);
                    return Ok(Control::Modified);
                }
                return Ok(Control::Continue);
            }
            let (q, d) = surface.reduce_phase(p).map_err(|e| Error::Integrator(format!("wraparound failed: {e}")))?;
            if d.is_identity() {
                return Ok(Control::Continue);
            }
            if mode == Mode::Tangent {
                let dj = d.jacobian(p);
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] = y[3 + 3 * i + j];
                    }
                }
                let m = mat3_mul(&dj, &m);
                for i in 0..3 {
                    for j in 0..3 {
                        y[3 + 3 * i + j] = m[i][j];
                    }
                }
            }
            y[0] = q.x;
            y[1] = q.y;
            y[2] = wrap_angle(q.theta);
            let total = decks.last().unwrap().then(&d);
            decks.push(total);
            Ok(Control::Modified)
        })?;
        Ok((decks, stats))
    }

    /// Flow `z0` for time `t` (negative allowed); endpoint reduced to the
    /// fundamental domain.
    pub fn flow(&self, z0: PhasePoint, t: f64, tol: &Tolerances) -> Result<(PhasePoint, Deck)> {
        let mut y = z0.to_array();
        let (mut decks, _) = self.run(Mode::Plain, &mut y, t, tol, |_, _| Ok(()))?;
        Ok((PhasePoint::from_slice(&y), decks.pop().unwrap()))
    }

    /// Flow with the derivative of the flow map, including the Jacobians of
    /// the deck transformations applied on the way, so `DΦ` maps tangent
    /// vectors at `z0` to tangent vectors at the reduced endpoint.
    pub fn flow_with_tangent(&self, z0: PhasePoint, t: f64, tol: &Tolerances) -> Result<(PhasePoint, Deck, Mat3)> {
        self.flow_with_tangent_from(z0, IDENTITY3, t, tol)
    }

    /// As [`flow_with_tangent`](Self::flow_with_tangent) starting from `m0`
    /// instead of the identity.
    pub fn flow_with_tangent_from(&self, z0: PhasePoint, m0: Mat3, t: f64, tol: &Tolerances) -> Result<(PhasePoint, Deck, Mat3)> {
        let mut y = vec![0.0; 12];
        y[..3].copy_from_slice(&z0.to_array());
        for i in 0..3 {
            for j in 0..3 {
                y[3 + 3 * i + j] = m0[i][j];
            }
        }
        let (mut decks, _) = self.run(Mode::Tangent, &mut y, t, tol, |_, _| Ok(()))?;
        let m = std::array::from_fn(|i| std::array::from_fn(|j| y[3 + 3 * i + j]));
        Ok((PhasePoint::from_slice(&y), decks.pop().unwrap(), m))
    }

    /// Flow recording dense output for every step.
    pub fn trajectory(&self, z0: PhasePoint, t: f64, tol: &Tolerances) -> Result<Trajectory> {
        let mut y = z0.to_array();
        let mut segments = Vec::new();
        let (decks, stats) = self.run(Mode::Plain, &mut y, t, tol, |s, d| {
            segments.push(Segment { dense: s.clone(), deck_index: d });
            Ok(())
        })?;
        Ok(Trajectory { start: z0, duration: t, end: PhasePoint::from_slice(&y), decks, segments, stats })
    }

    /// Flow streaming each step's dense output to `visit` without storing it.
    pub fn visit<F>(&self, z0: PhasePoint, t: f64, tol: &Tolerances, mut visit: F) -> Result<PhasePoint>
    where
        F: FnMut(&DenseStep) -> Result<()>,
    {
        let mut y = z0.to_array();
        self.run(Mode::Plain, &mut y, t, tol, |s, _| visit(s))?;
        Ok(PhasePoint::from_slice(&y))
    }
}

/// Drift of the Liouville density along a time-`t` flow map:
/// `det(DΦ) · e^{2φ(end)} / e^{2φ(start)} − 1`.
pub fn liouville_defect(field: &FlowField, z0: PhasePoint, t: f64, tol: &Tolerances) -> Result<f64> {
    let (z1, _, m) = field.flow_with_tangent(z0, t, tol)?;
    let s = field.surface();
    let ratio = (2.0 * (s.phi_jet(z1.x, z1.y)?.phi - s.phi_jet(z0.x, z0.y)?.phi)).exp();
    Ok(mat3_det(&m) * ratio - 1.0)
}

/// Maximum deviation from unit Riemannian speed along a recorded trajectory,
/// measured on the dense output at `per_step` points per step.
pub fn speed_drift(field: &FlowField, traj: &Trajectory, per_step: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for seg in &traj.segments {
        for j in 0..per_step {
            let t = seg.t0() + (seg.t1() - seg.t0()) * (j as f64 + 0.5) / per_step as f64;
            let p = seg.point(t);
            let (dx, dy) = (seg.dense.derivative(0, t), seg.dense.derivative(1, t));
            worst = worst.max((field.speed(p, dx, dy) - 1.0).abs());
        }
    }
    worst
}

/// Distance between two phase points in the chart, angle taken modulo 2π.
pub fn phase_distance(a: PhasePoint, b: PhasePoint) -> f64 {
    let d = [a.x - b.x, a.y - b.y, wrap_angle(a.theta - b.theta)];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}
