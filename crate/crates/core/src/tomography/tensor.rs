//! Symmetric covariant tensors of degree ≤ 2 and their lifts
//! `f̂(x, v) = f_{i…j} v^i ⋯ v^j` to the unit tangent bundle.
//!
//! In an isothermal chart a unit vector is `v = e^{-φ}(cos θ, sin θ)`, so a
//! degree-`m` lift is `e^{-mφ}` times a trigonometric polynomial of degree `m`
//! in `θ` containing only frequencies of the parity of `m`.

use crate::dynamics::Forcing;
use crate::error::{Error, Result};
use crate::fiber::{FiberFunction, PhaseGrid};
use crate::geometry::{BaseFunction, MagneticSurface, PhasePoint, SurfaceModel, TrigTerm, Window};
use num_complex::Complex64 as C;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A symmetric tensor `Σ f_{i…j} dx^i⊗⋯⊗dx^j + (c + h) g^{m/2}`.
///
/// Only the independent chart components are stored: `[f]`, `[f₁, f₂]` or
/// `[f₁₁, f₁₂, f₂₂]`. The metric part `(c + h)` exists for even degrees; it
/// lets constants and conformal tensors live on the octagon, where the
/// chart components have to be compactly supported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricTensor {
    pub degree: usize,
    pub components: Vec<BaseFunction>,
    #[serde(default)]
    pub metric_const: f64,
    #[serde(default)]
    pub metric_var: Option<BaseFunction>,
}

const ZERO: C = C::new(0.0, 0.0);

impl SymmetricTensor {
    pub fn new(degree: usize, components: Vec<BaseFunction>) -> Result<Self> {
        let t = Self { degree, components, metric_const: 0.0, metric_var: None };
        t.check_shape()?;
        Ok(t)
    }

    /// `c · g` for degree 2, the constant `c` for degree 0.
    pub fn metric(degree: usize, c: f64) -> Result<Self> {
        Self::conformal(degree, c, None)
    }

    /// `(c + h) · g`; its lift `c + h` has fiber degree 0.
    pub fn conformal(degree: usize, c: f64, h: Option<BaseFunction>) -> Result<Self> {
        let t = Self { degree, components: vec![BaseFunction::zero(); degree + 1], metric_const: c, metric_var: h };
        t.check_shape()?;
        Ok(t)
    }

    fn check_shape(&self) -> Result<()> {
        if self.degree > 2 {
            return Err(Error::Precondition(format!("tensor degree {} not supported", self.degree)));
        }
        if self.components.len() != self.degree + 1 {
            return Err(Error::Precondition(format!(
                "a degree-{} tensor has {} independent components, got {}",
                self.degree,
                self.degree + 1,
                self.components.len()
            )));
        }
        if self.degree % 2 == 1 && (self.metric_const != 0.0 || self.metric_var.is_some()) {
            return Err(Error::Precondition("odd-degree tensors have no metric part".into()));
        }
        Ok(())
    }

    /// Check that the tensor is well defined on the surface. On the octagon
    /// every chart component must vanish near the boundary so that it is
    /// compatible with the side pairings.
    pub fn validate(&self, surface: &MagneticSurface) -> Result<()> {
        self.check_shape()?;
        let Some(group) = surface.group() else { return Ok(()) };
        let parts = self.components.iter().chain(self.metric_var.as_ref());
        for f in parts {
            if f.is_zero() {
                continue;
            }
            if f.window.is_none() {
                return Err(Error::Precondition("tensor components on the octagon must be windowed".into()));
            }
            for (z, _) in group.boundary_samples(16) {
                let v = f.value(z.re, z.im).norm();
                if v > 1e-12 {
                    return Err(Error::Precondition(format!("tensor component is {v:.2e} on the boundary")));
                }
            }
        }
        Ok(())
    }

    /// Fiber coefficients `(k, c_k(x))` of the lift at a base point, excluding
    /// the metric part.
    fn chart_modes(&self, e: f64, x: f64, y: f64) -> [(i32, C); 3] {
        let f: Vec<C> = self.components.iter().map(|f| f.value(x, y)).collect();
        match self.degree {
            0 => [(0, f[0]), (0, ZERO), (0, ZERO)],
            // f₁ cos θ + f₂ sin θ
            1 => [(1, e * (f[0] - C::i() * f[1]) * 0.5), (-1, e * (f[0] + C::i() * f[1]) * 0.5), (0, ZERO)],
            // f₁₁ cos²θ + 2 f₁₂ cos θ sin θ + f₂₂ sin²θ
            _ => {
                let e2 = e * e;
                [
                    (0, e2 * (f[0] + f[2]) * 0.5),
                    (2, e2 * (f[0] - f[2] - C::i() * 2.0 * f[1]) * 0.25),
                    (-2, e2 * (f[0] - f[2] + C::i() * 2.0 * f[1]) * 0.25),
                ]
            }
        }
    }

    fn metric_value(&self, x: f64, y: f64) -> C {
        self.metric_const + self.metric_var.as_ref().map_or(ZERO, |h| h.value(x, y))
    }

    /// Sample the lift on a phase grid.
    pub fn lift(&self, grid: &Arc<PhaseGrid>) -> Result<FiberFunction> {
        self.validate(grid.surface())?;
        let kmax = self.degree.min(grid.band_limit());
        if kmax < self.degree {
            return Err(Error::Precondition(format!("band limit {} below tensor degree {}", grid.band_limit(), self.degree)));
        }
        let mut u = FiberFunction::zeros(grid, kmax)?;
        let pts: Vec<(f64, f64)> = grid.base().points().collect();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let e = grid.e_neg_phi[i];
            for (k, v) in self.chart_modes(e, x, y) {
                if v != ZERO {
                    u.mode_mut(k)[i] += v;
                }
            }
            if let Some(h) = &self.metric_var {
                u.mode_mut(0)[i] += h.value(x, y);
            }
        }
        if self.metric_const != 0.0 {
            let c = u.offset() + self.metric_const;
            u.set_offset(c);
        }
        Ok(u)
    }

    /// Direct evaluation of `f_{i…j} v^i ⋯ v^j` at a point of the unit
    /// tangent bundle.
    pub fn eval(&self, surface: &MagneticSurface, p: PhasePoint) -> Result<C> {
        let e = (-surface.phi_jet(p.x, p.y)?.phi).exp();
        let v = [e * p.theta.cos(), e * p.theta.sin()];
        let f: Vec<C> = self.components.iter().map(|f| f.value(p.x, p.y)).collect();
        let direct = match self.degree {
            0 => f[0],
            1 => f[0] * v[0] + f[1] * v[1],
            _ => f[0] * v[0] * v[0] + f[1] * 2.0 * v[0] * v[1] + f[2] * v[1] * v[1],
        };
        // g(v, v) = 1 on the unit tangent bundle
        Ok(direct + self.metric_value(p.x, p.y))
    }

    /// Real part of the lift with its gradient in `(x, y, θ)`.
    pub fn real_jet(&self, surface: &MagneticSurface, p: PhasePoint) -> Result<(f64, [f64; 3])> {
        let j = surface.phi_jet(p.x, p.y)?;
        let m = self.degree as f64;
        let em = (-m * j.phi).exp();
        let (s, c) = p.theta.sin_cos();
        let jets: Vec<_> = self.components.iter().map(|f| f.jet(p.x, p.y)).collect();
        let re = |z: C| z.re;
        // trigonometric part A(x, θ) and its partial derivatives
        let (a, ax, ay, at) = match self.degree {
            0 => {
                let f = &jets[0];
                (re(f.value), re(f.grad[0]), re(f.grad[1]), 0.0)
            }
            1 => {
                let (f1, f2) = (&jets[0], &jets[1]);
                (
                    re(f1.value) * c + re(f2.value) * s,
                    re(f1.grad[0]) * c + re(f2.grad[0]) * s,
                    re(f1.grad[1]) * c + re(f2.grad[1]) * s,
                    -re(f1.value) * s + re(f2.value) * c,
                )
            }
            _ => {
                let (f11, f12, f22) = (&jets[0], &jets[1], &jets[2]);
                let comb = |a: f64, b: f64, d: f64| a * c * c + 2.0 * b * c * s + d * s * s;
                (
                    comb(re(f11.value), re(f12.value), re(f22.value)),
                    comb(re(f11.grad[0]), re(f12.grad[0]), re(f22.grad[0])),
                    comb(re(f11.grad[1]), re(f12.grad[1]), re(f22.grad[1])),
                    2.0 * (re(f22.value) - re(f11.value)) * c * s + 2.0 * re(f12.value) * (c * c - s * s),
                )
            }
        };
        let mut val = em * a;
        let mut grad = [em * (ax - m * j.grad[0] * a), em * (ay - m * j.grad[1] * a), em * at];
        val += self.metric_const;
        if let Some(h) = &self.metric_var {
            let hj = h.jet(p.x, p.y);
            val += hj.value.re;
            grad[0] += hj.grad[0].re;
            grad[1] += hj.grad[1].re;
        }
        Ok((val, grad))
    }

    /// Short human-readable provenance string.
    pub fn descriptor(&self) -> String {
        let active = self.components.iter().filter(|f| !f.is_zero()).count();
        format!(
            "degree-{} tensor, {} nonzero chart components, metric part {}{}",
            self.degree,
            active,
            self.metric_const,
            if self.metric_var.is_some() { " + variable" } else { "" }
        )
    }
}

/// Seeded random real tensor of the given degree. On the octagon the
/// components carry narrow windows near the origin, as for random fiber
/// functions.
pub fn random_tensor<R: Rng + ?Sized>(model: SurfaceModel, degree: usize, base_band: i32, rng: &mut R) -> Result<SymmetricTensor> {
    let components = (0..=degree).map(|_| crate::fiber::random::random_base(model, 0, base_band, rng).real_part()).collect();
    SymmetricTensor::new(degree, components)
}

/// A real 2-tensor supported in a smooth bump of the given radius about the
/// origin of the octagon, with a few low frequencies. Used as a broad
/// thermostat perturbation.
pub fn bump_tensor(amplitude: [f64; 3], frequency: i32, radius: f64) -> SymmetricTensor {
    let window = Window::Bump { center: [0.0, 0.0], radius };
    let make = |a: f64, phase: f64| {
        let mut terms = vec![TrigTerm { n: [0, 0], c: C::new(a, 0.0) }];
        if frequency != 0 {
            let c = C::from_polar(0.5 * a, phase);
            terms.push(TrigTerm { n: [frequency, 0], c });
            terms.push(TrigTerm { n: [-frequency, 0], c: c.conj() });
        }
        BaseFunction::windowed(terms, 1.0, [0.0, 0.0], window)
    };
    SymmetricTensor {
        degree: 2,
        components: vec![make(amplitude[0], 0.3), make(amplitude[1], 1.1), make(amplitude[2], -0.7)],
        metric_const: 0.0,
        metric_var: None,
    }
}

/// The lift of a real tensor as a perturbation of the magnetic intensity.
#[derive(Clone, Debug)]
pub struct TensorForcing {
    tensor: SymmetricTensor,
    surface: Arc<MagneticSurface>,
}

impl TensorForcing {
    pub fn new(tensor: SymmetricTensor, surface: Arc<MagneticSurface>) -> Result<Self> {
        tensor.validate(&surface)?;
        Ok(Self { tensor, surface })
    }

    pub fn tensor(&self) -> &SymmetricTensor {
        &self.tensor
    }
}

impl Forcing for TensorForcing {
    fn jet(&self, p: PhasePoint) -> (f64, [f64; 3]) {
        self.tensor.real_jet(&self.surface, p).unwrap_or((f64::NAN, [f64::NAN; 3]))
    }
}
