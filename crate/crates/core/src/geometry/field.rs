//! Smooth base functions: trigonometric polynomials, optionally multiplied by a
//! compactly supported (or rapidly decaying) window.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One Fourier term `c · exp(2πi n·(x - origin)/period)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub n: [i32; 2],
    pub c: C,
}

/// Real-valued term as it appears in configuration files:
/// `cos · cos(2π n·x) + sin · sin(2π n·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealTerm {
    pub n: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Gaussian { center: [f64; 2], sigma: f64 },
    Bump { center: [f64; 2], radius: f64 },
}

impl Window {
    /// Value, gradient and Hessian of the window.
    pub fn jet(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 3]) {
        match *self {
            Window::Gaussian { center, sigma } => {
                let d = [x - center[0], y - center[1]];
                let s2 = sigma * sigma;
                let w = (-(d[0] * d[0] + d[1] * d[1]) / (2.0 * s2)).exp();
                let g = [-d[0] / s2 * w, -d[1] / s2 * w];
                let hxx = w * (d[0] * d[0] / (s2 * s2) - 1.0 / s2);
                let hxy = w * d[0] * d[1] / (s2 * s2);
                let hyy = w * (d[1] * d[1] / (s2 * s2) - 1.0 / s2);
                (w, g, [hxx, hxy, hyy])
            }
            Window::Bump { center, radius } => {
                let d = [x - center[0], y - center[1]];
                let r2 = radius * radius;
                let t = (d[0] * d[0] + d[1] * d[1]) / r2;
                if t >= 1.0 {
                    return (0.0, [0.0; 2], [0.0; 3]);
                }
                let om = 1.0 - t;
                let w = (1.0 - 1.0 / om).exp();
                let g1 = -1.0 / (om * om);
                let g2 = -2.0 / (om * om * om);
                let dt = [2.0 * d[0] / r2, 2.0 * d[1] / r2];
                let a = w * (g1 * g1 + g2);
                let b = w * g1 * 2.0 / r2;
                (
                    w,
                    [w * g1 * dt[0], w * g1 * dt[1]],
                    [a * dt[0] * dt[0] + b, a * dt[0] * dt[1], a * dt[1] * dt[1] + b],
                )
            }
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            Window::Gaussian { center, .. } | Window::Bump { center, .. } => center,
        }
    }

    /// Radius beyond which the window is below `1e-16` (or exactly zero).
    pub fn effective_radius(&self) -> f64 {
        match *self {
            Window::Gaussian { sigma, .. } => sigma * (2.0 * 16.0 * 10f64.ln()).sqrt(),
            Window::Bump { radius, .. } => radius,
        }
    }
}

/// `Σ c_n exp(2πi n·(x - origin)/period)`, optionally times a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseFunction {
    pub terms: Vec<TrigTerm>,
    pub period: f64,
    pub origin: [f64; 2],
    pub window: Option<Window>,
}

/// Value, gradient and Hessian `[xx, xy, yy]`.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub value: C,
    pub grad: [C; 2],
    pub hess: [C; 3],
}

impl BaseFunction {
    pub fn zero() -> Self {
        Self::trig(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Self::trig(vec![TrigTerm { n: [0, 0], c: C::new(c, 0.0) }])
    }

    /// Unit-periodic trigonometric polynomial.
    pub fn trig(terms: Vec<TrigTerm>) -> Self {
        Self { terms, period: 1.0, origin: [0.0, 0.0], window: None }
    }

    /// Real unit-periodic trigonometric polynomial from cos/sin coefficients.
    pub fn from_real_terms(terms: &[RealTerm]) -> Self {
        let mut out = Vec::new();
        for t in terms {
            if t.n == [0, 0] {
                out.push(TrigTerm { n: t.n, c: C::new(t.cos, 0.0) });
                continue;
            }
            // a cos + b sin = (a - ib)/2 e^{+} + (a + ib)/2 e^{-}
            out.push(TrigTerm { n: t.n, c: C::new(t.cos, -t.sin) * 0.5 });
            out.push(TrigTerm { n: [-t.n[0], -t.n[1]], c: C::new(t.cos, t.sin) * 0.5 });
        }
        Self::trig(out)
    }

    pub fn windowed(terms: Vec<TrigTerm>, period: f64, origin: [f64; 2], window: Window) -> Self {
        Self { terms, period, origin, window: Some(window) }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.c == C::new(0.0, 0.0))
    }

    /// The constant term if the function is a pure constant.
    pub fn as_constant(&self) -> Option<C> {
        if self.window.is_some() {
            return if self.is_zero() { Some(C::new(0.0, 0.0)) } else { None };
        }
        let mut c = C::new(0.0, 0.0);
        for t in &self.terms {
            if t.n == [0, 0] {
                c += t.c;
            } else if t.c != C::new(0.0, 0.0) {
                return None;
            }
        }
        Some(c)
    }

    pub fn max_frequency(&self) -> i32 {
        self.terms.iter().map(|t| t.n[0].abs().max(t.n[1].abs())).max().unwrap_or(0)
    }

    pub fn conj(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| TrigTerm { n: [-t.n[0], -t.n[1]], c: t.c.conj() })
            .collect();
        Self { terms, ..self.clone() }
    }

    pub fn scaled(&self, s: C) -> Self {
        let terms = self.terms.iter().map(|t| TrigTerm { n: t.n, c: t.c * s }).collect();
        Self { terms, ..self.clone() }
    }

    /// Real part as a function, `(f + conj f)/2`.
    pub fn real_part(&self) -> Self {
        let mut terms: Vec<TrigTerm> =
            self.terms.iter().map(|t| TrigTerm { n: t.n, c: t.c * 0.5 }).collect();
        terms.extend(self.conj().terms.iter().map(|t| TrigTerm { n: t.n, c: t.c * 0.5 }));
        Self { terms, ..self.clone() }
    }

    fn trig_jet(&self, x: f64, y: f64, need_hess: bool) -> Jet {
        let k = 2.0 * PI / self.period;
        let (u, v) = (x - self.origin[0], y - self.origin[1]);
        let mut val = C::new(0.0, 0.0);
        let mut gx = val;
        let mut gy = val;
        let mut hxx = val;
        let mut hxy = val;
        let mut hyy = val;
        for t in &self.terms {
            let (a, b) = (k * t.n[0] as f64, k * t.n[1] as f64);
            let e = t.c * C::from_polar(1.0, a * u + b * v);
            val += e;
            let ie = C::new(-e.im, e.re);
            gx += ie * a;
            gy += ie * b;
            if need_hess {
                hxx -= e * (a * a);
                hxy -= e * (a * b);
                hyy -= e * (b * b);
            }
        }
        Jet { value: val, grad: [gx, gy], hess: [hxx, hxy, hyy] }
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet {
        self.jet_impl(x, y, true)
    }

    fn jet_impl(&self, x: f64, y: f64, need_hess: bool) -> Jet {
        match &self.window {
            None => self.trig_jet(x, y, need_hess),
            Some(w) => {
                let (wv, wg, wh) = w.jet(x, y);
                if wv == 0.0 && wg == [0.0, 0.0] {
                    let z = C::new(0.0, 0.0);
                    return Jet { value: z, grad: [z, z], hess: [z, z, z] };
                }
                let t = self.trig_jet(x, y, need_hess);
                let value = t.value * wv;
                let grad = [t.grad[0] * wv + t.value * wg[0], t.grad[1] * wv + t.value * wg[1]];
                let hess = [
                    t.hess[0] * wv + t.grad[0] * (2.0 * wg[0]) + t.value * wh[0],
                    t.hess[1] * wv + t.grad[0] * wg[1] + t.grad[1] * wg[0] + t.value * wh[1],
                    t.hess[2] * wv + t.grad[1] * (2.0 * wg[1]) + t.value * wh[2],
                ];
                Jet { value, grad, hess }
            }
        }
    }

    pub fn value(&self, x: f64, y: f64) -> C {
        match &self.window {
            None => {
                let k = 2.0 * PI / self.period;
                let (u, v) = (x - self.origin[0], y - self.origin[1]);
                self.terms
                    .iter()
                    .map(|t| t.c * C::from_polar(1.0, k * (t.n[0] as f64 * u + t.n[1] as f64 * v)))
                    .sum()
            }
            Some(w) => {
                let (wv, _, _) = w.jet(x, y);
                if wv == 0.0 {
                    return C::new(0.0, 0.0);
                }
                let bare = Self { window: None, ..self.clone() };
                bare.value(x, y) * wv
            }
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [C; 2] {
        self.jet_impl(x, y, false).grad
    }

    pub fn laplacian(&self, x: f64, y: f64) -> C {
        let h = self.jet(x, y).hess;
        h[0] + h[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<BaseFunction> {
        let terms = vec![
            TrigTerm { n: [1, 0], c: C::new(0.3, -0.2) },
            TrigTerm { n: [-2, 1], c: C::new(0.1, 0.4) },
            TrigTerm { n: [0, 0], c: C::new(0.5, 0.0) },
        ];
        vec![
            BaseFunction::trig(terms.clone()),
            BaseFunction::windowed(
                terms.clone(),
                1.3,
                [-0.2, 0.1],
                Window::Gaussian { center: [0.05, -0.02], sigma: 0.2 },
            ),
            BaseFunction::windowed(terms, 1.3, [0.0, 0.0], Window::Bump { center: [0.1, 0.0], radius: 0.5 }),
        ]
    }

    #[test]
    fn jet_matches_finite_differences() {
        let h = 1e-5;
        for f in sample() {
            for &(x, y) in &[(0.13, -0.07), (0.3, 0.2), (-0.1, 0.05)] {
                let j = f.jet(x, y);
                let fx = (f.value(x + h, y) - f.value(x - h, y)) / (2.0 * h);
                let fy = (f.value(x, y + h) - f.value(x, y - h)) / (2.0 * h);
                assert!((fx - j.grad[0]).norm() < 1e-7);
                assert!((fy - j.grad[1]).norm() < 1e-7);
                let gx = |x, y| f.gradient(x, y)[0];
                let gy = |x, y| f.gradient(x, y)[1];
                let fxx = (gx(x + h, y) - gx(x - h, y)) / (2.0 * h);
                let fxy = (gx(x, y + h) - gx(x, y - h)) / (2.0 * h);
                let fyy = (gy(x, y + h) - gy(x, y - h)) / (2.0 * h);
                assert!((fxx - j.hess[0]).norm() < 1e-6);
                assert!((fxy - j.hess[1]).norm() < 1e-6);
                assert!((fyy - j.hess[2]).norm() < 1e-6);
                assert!((j.value - f.value(x, y)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn real_terms_give_real_function() {
        let f = BaseFunction::from_real_terms(&[
            RealTerm { n: [1, 2], cos: 0.3, sin: -0.7 },
            RealTerm { n: [0, 0], cos: 1.5, sin: 0.0 },
        ]);
        let (x, y) = (0.21, 0.67);
        let arg = 2.0 * PI * (x + 2.0 * y);
        let expect = 1.5 + 0.3 * arg.cos() - 0.7 * arg.sin();
        let v = f.value(x, y);
        assert!((v.re - expect).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn conj_and_real_part() {
        for f in sample() {
            let (x, y) = (0.11, 0.02);
            assert!((f.conj().value(x, y) - f.value(x, y).conj()).norm() < 1e-14);
            let r = f.real_part().value(x, y);
            assert!((r.re - f.value(x, y).re).abs() < 1e-14 && r.im.abs() < 1e-14);
        }
    }
}
