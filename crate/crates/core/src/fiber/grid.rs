//! Base grids and the precomputed metric data that the spectral operators use.

use crate::error::{Error, Result};
use crate::geometry::{MagneticSurface, SurfaceModel};
use num_complex::Complex64 as C;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Uniform periodic `n × n` grid on `[origin, origin + length)²`.
///
/// On the torus this is the whole fundamental domain. On the octagon it is a
/// square patch around the origin: functions stored on it are supported
/// inside the inscribed disk of the octagon and are extended by zero (plus a
/// constant offset, see [`crate::fiber::FiberFunction`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseGrid {
    pub n: usize,
    pub origin: [f64; 2],
    pub length: f64,
}

/// Half-width of the square patch used on the octagon. It circumscribes the
/// inscribed disk of the fundamental domain, so compactly supported functions
/// inside that disk are periodic on the patch.
pub const BOLZA_PATCH_HALF_WIDTH: f64 = 0.645;

impl BaseGrid {
    pub fn torus(n: usize) -> Self {
        Self { n, origin: [0.0, 0.0], length: 1.0 }
    }

    pub fn bolza_patch(n: usize) -> Self {
        let s = BOLZA_PATCH_HALF_WIDTH;
        Self { n, origin: [-s, -s], length: 2.0 * s }
    }

    pub fn for_model(model: SurfaceModel, n: usize) -> Self {
        match model {
            SurfaceModel::FlatTorusConformal => Self::torus(n),
            SurfaceModel::BolzaOctagon => Self::bolza_patch(n),
        }
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Coordinates of node `(i, j)`; storage index is `j * n + i`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (self.origin[0] + i as f64 * h, self.origin[1] + j as f64 * h)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.n).flat_map(move |j| (0..self.n).map(move |i| self.point(i, j)))
    }

    /// Angular wavenumber of FFT bin `m`; the Nyquist bin maps to zero.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.n as i64;
        let m = m as i64;
        let s = if 2 * m < n {
            m
        } else if 2 * m == n {
            0
        } else {
            m - n
        };
        2.0 * PI * s as f64 / self.length
    }
}

/// Two-dimensional FFT on an `n × n` row-major array.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({})", self.n)
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn run(&self, data: &mut [C], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        fft.process(data);
        let mut col = vec![C::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                col[j] = data[j * n + i];
            }
            fft.process(&mut col);
            for j in 0..n {
                data[j * n + i] = col[j];
            }
        }
    }

    pub fn forward(&self, data: &mut [C]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/n²` normalisation.
    pub fn inverse(&self, data: &mut [C]) {
        self.run(data, &self.inverse);
        let s = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// A discretised unit tangent bundle: the surface, a base grid, the fiber
/// band limit `N` and the metric quantities sampled at the nodes.
#[derive(Debug)]
pub struct PhaseGrid {
    surface: Arc<MagneticSurface>,
    base: BaseGrid,
    band_limit: usize,
    pub(crate) e_neg_phi: Vec<f64>,
    /// `∂φ = ½(φ_x − iφ_y)`
    pub(crate) dphi: Vec<C>,
    /// Quadrature weights `e^{2φ} h²`.
    pub(crate) weight: Vec<f64>,
    pub(crate) curvature: Vec<f64>,
    pub(crate) lambda: Vec<f64>,
    pub(crate) lambda_grad: Vec<[f64; 2]>,
    pub(crate) fft: Fft2,
}

impl PhaseGrid {
    pub fn new(surface: Arc<MagneticSurface>, n: usize, band_limit: usize) -> Result<Arc<Self>> {
        if n < 8 {
            return Err(Error::Precondition(format!("base grid needs at least 8 points per side, got {n}")));
        }
        let base = BaseGrid::for_model(surface.model(), n);
        let h2 = base.spacing() * base.spacing();
        let len = base.len();
        let mut g = Self {
            surface: surface.clone(),
            base,
            band_limit,
            e_neg_phi: Vec::with_capacity(len),
            dphi: Vec::with_capacity(len),
            weight: Vec::with_capacity(len),
            curvature: Vec::with_capacity(len),
            lambda: Vec::with_capacity(len),
            lambda_grad: Vec::with_capacity(len),
            fft: Fft2::new(n),
        };
        for (x, y) in base.points() {
            let j = surface.phi_jet(x, y)?;
            g.e_neg_phi.push((-j.phi).exp());
            g.dphi.push(C::new(0.5 * j.grad[0], -0.5 * j.grad[1]));
            g.weight.push((2.0 * j.phi).exp() * h2);
            g.curvature.push(-(-2.0 * j.phi).exp() * (j.hess[0] + j.hess[2]));
            g.lambda.push(surface.lambda(x, y));
            g.lambda_grad.push(surface.lambda_gradient(x, y));
        }
        Ok(Arc::new(g))
    }

    pub fn surface(&self) -> &Arc<MagneticSurface> {
        &self.surface
    }

    pub fn base(&self) -> &BaseGrid {
        &self.base
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn model(&self) -> SurfaceModel {
        self.surface.model()
    }

    /// Functions on the octagon patch are compactly supported plus a constant.
    pub fn is_patch(&self) -> bool {
        self.model() == SurfaceModel::BolzaOctagon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn same_as(&self, other: &PhaseGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.base == other.base
                && self.band_limit == other.band_limit
                && Arc::ptr_eq(&self.surface, &other.surface))
    }

    /// Spectral Wirtinger derivatives `(∂h, ∂̄h)` of grid values `h`.
    pub fn wirtinger(&self, h: &[C]) -> (Vec<C>, Vec<C>) {
        let n = self.base.n;
        let mut spec = h.to_vec();
        self.fft.forward(&mut spec);
        let mut d = spec.clone();
        let mut db = spec;
        for my in 0..n {
            let ky = self.base.wavenumber(my);
            for mx in 0..n {
                let kx = self.base.wavenumber(mx);
                let idx = my * n + mx;
                // ∂ ↔ ½(i kx + ky), ∂̄ ↔ ½(i kx − ky)
                d[idx] *= C::new(0.5 * ky, 0.5 * kx);
                db[idx] *= C::new(-0.5 * ky, 0.5 * kx);
            }
        }
        self.fft.inverse(&mut d);
        self.fft.inverse(&mut db);
        (d, db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BaseFunction, RealTerm};

    #[test]
    fn fft_round_trip() {
        let f = Fft2::new(12);
        let data: Vec<C> = (0..144).map(|i| C::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut d = data.clone();
        f.forward(&mut d);
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn wirtinger_derivatives_of_trig_poly() {
        let s = Arc::new(MagneticSurface::flat_torus(0.0));
        let g = PhaseGrid::new(s, 32, 4).unwrap();
        let f = BaseFunction::from_real_terms(&[RealTerm { n: [2, -3], cos: 0.4, sin: 0.9 }]);
        let h: Vec<C> = g.base().points().map(|(x, y)| f.value(x, y)).collect();
        let (d, db) = g.wirtinger(&h);
        for ((x, y), (d, db)) in g.base().points().zip(d.iter().zip(&db)) {
            let gr = f.gradient(x, y);
            let ed = (gr[0] - C::i() * gr[1]) * 0.5;
            let edb = (gr[0] + C::i() * gr[1]) * 0.5;
            assert!((d - ed).norm() < 1e-11 && (db - edb).norm() < 1e-11);
        }
    }

    #[test]
    fn bolza_weights_integrate_area_of_disk() {
        // hyperbolic area of the Euclidean disk of radius 0.5 via a smooth cut-off is
        // awkward; check instead that the Gaussian e^{-r²/2σ²} integrates against
        // 4/(1-r²)² to the polar quadrature value
        let s = Arc::new(MagneticSurface::bolza(0.0));
        let g = PhaseGrid::new(s, 96, 4).unwrap();
        let sigma: f64 = 0.08;
        let grid_sum: f64 = g
            .base()
            .points()
            .zip(g.weights())
            .map(|((x, y), w)| w * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp())
            .sum();
        let rule = crate::quadrature::gauss_legendre_on(96, 0.0, 0.64);
        let polar: f64 = rule
            .iter()
            .map(|&(r, w)| {
                w * 2.0 * PI * r * 4.0 / (1.0 - r * r).powi(2) * (-(r * r) / (2.0 * sigma * sigma)).exp()
            })
            .sum();
        assert!((grid_sum - polar).abs() < 1e-11 * polar, "{grid_sum} {polar}");
    }
}
