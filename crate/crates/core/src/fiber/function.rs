//! Functions on the unit tangent bundle as fiber-Fourier series
//! `u(x, θ) = Σ_k u_k(x) e^{ikθ}`.

use super::grid::PhaseGrid;
use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use std::f64::consts::PI;
use std::sync::Arc;

/// Band-limited function on the unit tangent bundle.
///
/// Degrees `-kmax..=kmax` are stored as grid values of `u_k`. On the octagon
/// patch the stored values are compactly supported and `offset` carries an
/// additional constant (fiber degree 0), so that constants are representable.
/// On the torus `offset` is always zero.
#[derive(Clone, Debug)]
pub struct FiberFunction {
    pub(crate) grid: Arc<PhaseGrid>,
    pub(crate) kmax: usize,
    pub(crate) modes: Vec<Vec<C>>,
    pub(crate) offset: C,
    pub(crate) leakage: f64,
}

const ZERO: C = C::new(0.0, 0.0);

impl FiberFunction {
    pub fn zeros(grid: &Arc<PhaseGrid>, kmax: usize) -> Result<Self> {
        if kmax > grid.band_limit() {
            return Err(Error::Precondition(format!(
                "fiber degree {kmax} exceeds band limit {}",
                grid.band_limit()
            )));
        }
        let len = grid.base().len();
        Ok(Self { grid: grid.clone(), kmax, modes: vec![vec![ZERO; len]; 2 * kmax + 1], offset: ZERO, leakage: 0.0 })
    }

    pub fn constant(grid: &Arc<PhaseGrid>, c: C) -> Self {
        let mut u = Self::zeros(grid, 0).expect("degree 0 always fits");
        u.set_offset(c);
        u
    }

    /// Sample `f(k, x, y)` for `|k| ≤ kmax`.
    pub fn from_fn(grid: &Arc<PhaseGrid>, kmax: usize, f: impl Fn(i32, f64, f64) -> C) -> Result<Self> {
        let mut u = Self::zeros(grid, kmax)?;
        let pts: Vec<(f64, f64)> = grid.base().points().collect();
        for k in -(kmax as i32)..=kmax as i32 {
            let m = u.mode_mut(k);
            for (v, &(x, y)) in m.iter_mut().zip(&pts) {
                *v = f(k, x, y);
            }
        }
        Ok(u)
    }

    pub fn grid(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn band_limit(&self) -> usize {
        self.grid.band_limit()
    }

    pub fn offset(&self) -> C {
        self.offset
    }

    /// Set the constant part. On the torus it is folded into degree 0.
    pub fn set_offset(&mut self, c: C) {
        if self.grid.is_patch() {
            self.offset = c;
        } else {
            let delta = c - self.offset;
            for v in self.mode_mut(0) {
                *v += delta;
            }
            self.offset = ZERO;
        }
    }

    /// Accumulated L² norm of coefficients dropped by band truncation.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn mode(&self, k: i32) -> Option<&[C]> {
        if k.unsigned_abs() as usize > self.kmax {
            return None;
        }
        Some(&self.modes[(k + self.kmax as i32) as usize])
    }

    pub fn mode_mut(&mut self, k: i32) -> &mut [C] {
        assert!(k.unsigned_abs() as usize <= self.kmax, "degree {k} outside storage");
        let i = (k + self.kmax as i32) as usize;
        &mut self.modes[i]
    }

    pub fn degrees(&self) -> std::ops::RangeInclusive<i32> {
        -(self.kmax as i32)..=self.kmax as i32
    }

    /// Copy with storage for `|k| ≤ kmax`; dropped degrees are counted as leakage.
    pub fn with_kmax(&self, kmax: usize) -> Result<Self> {
        let mut out = Self::zeros(&self.grid, kmax)?;
        out.offset = self.offset;
        out.leakage = self.leakage;
        for k in self.degrees() {
            let m = self.mode(k).unwrap();
            if k.unsigned_abs() as usize <= kmax {
                out.mode_mut(k).copy_from_slice(m);
            } else {
                out.leakage += self.grid_norm(m);
            }
        }
        Ok(out)
    }

    pub(crate) fn check_same_grid(&self, other: &FiberFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `sqrt(2π Σ |h|² w)` for grid values of a single degree.
    pub(crate) fn grid_norm(&self, h: &[C]) -> f64 {
        let s: f64 = h.iter().zip(self.grid.weights()).map(|(v, w)| v.norm_sqr() * w).sum();
        (2.0 * PI * s).sqrt()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C, other: &FiberFunction, b: C) -> FiberFunction {
        assert!(self.grid.same_as(&other.grid), "grid mismatch");
        let kmax = self.kmax.max(other.kmax);
        let mut out = Self::zeros(&self.grid, kmax).expect("within band");
        for k in out.degrees() {
            let dst = out.mode_mut(k);
            if let Some(m) = self.mode(k) {
                for (d, v) in dst.iter_mut().zip(m) {
                    *d += a * v;
                }
            }
            if let Some(m) = other.mode(k) {
                for (d, v) in dst.iter_mut().zip(m) {
                    *d += b * v;
                }
            }
        }
        out.offset = a * self.offset + b * other.offset;
        out.leakage = a.norm() * self.leakage + b.norm() * other.leakage;
        out
    }

    pub fn add(&self, other: &FiberFunction) -> FiberFunction {
        self.combine(C::new(1.0, 0.0), other, C::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &FiberFunction) -> FiberFunction {
        self.combine(C::new(1.0, 0.0), other, C::new(-1.0, 0.0))
    }

    pub fn scale(&self, a: C) -> FiberFunction {
        let mut out = self.clone();
        for m in out.modes.iter_mut() {
            for v in m.iter_mut() {
                *v *= a;
            }
        }
        out.offset *= a;
        out.leakage *= a.norm();
        out
    }

    /// Pointwise complex conjugate: `(ū)_k = conj(u_{-k})`.
    pub fn conj(&self) -> FiberFunction {
        let mut out = self.clone();
        for k in self.degrees() {
            let src = self.mode(-k).unwrap();
            for (d, s) in out.mode_mut(k).iter_mut().zip(src) {
                *d = s.conj();
            }
        }
        out.offset = self.offset.conj();
        out
    }

    /// Relative size of `u − ū`; zero for real-valued functions.
    pub fn reality_residual(&self) -> f64 {
        let n = self.l2_norm();
        if n == 0.0 {
            return 0.0;
        }
        self.sub(&self.conj()).l2_norm() / n
    }

    /// `⟨u, v⟩ = ∫_SM u v̄ dΣ³`, by grid quadrature in the base and fiber
    /// orthogonality.
    pub fn inner_product(&self, other: &FiberFunction) -> Result<C> {
        self.check_same_grid(other)?;
        let w = self.grid.weights();
        let mut s = ZERO;
        for k in self.degrees() {
            if let (Some(a), Some(b)) = (self.mode(k), other.mode(k)) {
                s += a.iter().zip(b).zip(w).map(|((a, b), w)| a * b.conj() * *w).sum::<C>();
            }
        }
        if self.grid.is_patch() {
            let area = self.grid.surface().surface_area();
            s += self.offset * other.offset.conj() * area;
            let sum_w = |m: &[C]| m.iter().zip(w).map(|(v, w)| v * *w).sum::<C>();
            s += self.offset * sum_w(other.mode(0).unwrap()).conj();
            s += sum_w(self.mode(0).unwrap()) * other.offset.conj();
        }
        Ok(s * 2.0 * PI)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner_product(self).expect("same grid").re.max(0.0).sqrt()
    }

    /// `⟨u, 1⟩`.
    pub fn mean_integral(&self) -> C {
        let one = Self::constant(&self.grid, C::new(1.0, 0.0));
        self.inner_product(&one).expect("same grid")
    }

    /// L² mass per fiber degree, `‖u_k‖²`.
    pub fn energy_profile(&self) -> Vec<(i32, f64)> {
        self.degrees()
            .map(|k| {
                let mut part = Self::zeros(&self.grid, self.kmax).unwrap();
                part.mode_mut(k).copy_from_slice(self.mode(k).unwrap());
                if k == 0 {
                    part.offset = self.offset;
                }
                (k, part.l2_norm().powi(2))
            })
            .collect()
    }

    /// Largest `|k|` whose mass exceeds `tol` times the total.
    pub fn degree(&self, tol: f64) -> usize {
        let prof = self.energy_profile();
        let total: f64 = prof.iter().map(|p| p.1).sum();
        prof.iter()
            .filter(|(_, e)| *e > tol * tol * total.max(f64::MIN_POSITIVE))
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Keep only the listed degree.
    pub fn component(&self, k: i32) -> FiberFunction {
        let mut out = Self::zeros(&self.grid, self.kmax).unwrap();
        if let Some(m) = self.mode(k) {
            out.mode_mut(k).copy_from_slice(m);
        }
        if k == 0 {
            out.offset = self.offset;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MagneticSurface;

    #[test]
    fn volume_anchors() {
        let torus = PhaseGrid::new(Arc::new(MagneticSurface::flat_torus(0.0)), 16, 4).unwrap();
        let one = FiberFunction::constant(&torus, C::new(1.0, 0.0));
        assert!((one.l2_norm().powi(2) - 2.0 * PI).abs() < 1e-12);
        let bolza = PhaseGrid::new(Arc::new(MagneticSurface::bolza(0.0)), 32, 4).unwrap();
        let one = FiberFunction::constant(&bolza, C::new(1.0, 0.0));
        assert!((one.l2_norm().powi(2) - 8.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn distinct_degrees_are_orthogonal() {
        let g = PhaseGrid::new(Arc::new(MagneticSurface::flat_torus(0.0)), 16, 4).unwrap();
        let e1 = FiberFunction::from_fn(&g, 2, |k, _, _| if k == 1 { C::new(1.0, 0.0) } else { ZERO }).unwrap();
        let e2 = FiberFunction::from_fn(&g, 2, |k, _, _| if k == 2 { C::new(1.0, 0.0) } else { ZERO }).unwrap();
        assert_eq!(e1.inner_product(&e2).unwrap(), ZERO);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let s = Arc::new(MagneticSurface::flat_torus(0.0));
        let a = PhaseGrid::new(s.clone(), 16, 4).unwrap();
        let b = PhaseGrid::new(s, 32, 4).unwrap();
        let u = FiberFunction::constant(&a, C::new(1.0, 0.0));
        let v = FiberFunction::constant(&b, C::new(1.0, 0.0));
        assert!(matches!(u.inner_product(&v), Err(Error::GridMismatch)));
    }
}
