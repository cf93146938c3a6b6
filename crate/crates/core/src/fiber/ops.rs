//! The frame `X, X⊥, V`, the ladder operators `η±`, the generator `X + λV`
//! and the projections used in the energy estimates.
//!
//! Chart conventions, with `∂ = ½(∂x − i∂y)`:
//!
//! ```text
//! η₊(h e^{ikθ}) = e^{-φ}(∂h − k ∂φ h) e^{i(k+1)θ}
//! η₋(h e^{ikθ}) = e^{-φ}(∂̄h + k ∂̄φ h) e^{i(k−1)θ}
//! X = η₊ + η₋,   X⊥ = −i(η₊ − η₋),   V = ∂θ
//! ```
//!
//! which is `X = e^{-φ}(cos θ ∂x + sin θ ∂y + (−sin θ φx + cos θ φy) ∂θ)` and
//! realises `[X, V] = X⊥`, `[V, X⊥] = X`, `[X, X⊥] = −KV`.

use super::function::FiberFunction;
use super::grid::PhaseGrid;
use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use std::sync::Arc;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Relative truncation mass beyond which an operator refuses to return.
pub const LEAKAGE_TOLERANCE: f64 = 1e-8;

/// How many fiber degrees an operator can add to its input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    V,
    X,
    XPerp,
    EtaPlus,
    EtaMinus,
    Generator,
    MultiplyLambda,
}

impl Operator {
    pub fn band_growth(self) -> usize {
        match self {
            Operator::V | Operator::MultiplyLambda => 0,
            _ => 1,
        }
    }
}

impl FiberFunction {
    fn check_leakage(self, input_norm: f64) -> Result<Self> {
        if self.leakage > LEAKAGE_TOLERANCE * input_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Leakage { leakage: self.leakage, tolerance: LEAKAGE_TOLERANCE * input_norm });
        }
        Ok(self)
    }

    /// `(Vu)_k = i k u_k`.
    pub fn apply_v(&self) -> FiberFunction {
        let mut out = self.clone();
        out.offset = ZERO;
        for k in self.degrees() {
            let f = I * k as f64;
            for v in out.mode_mut(k) {
                *v *= f;
            }
        }
        out
    }

    /// `(η₊u, η₋u)` computed together; each output has room for one more degree.
    pub fn ladder(&self) -> Result<(FiberFunction, FiberFunction)> {
        let g = &self.grid;
        let n_band = g.band_limit();
        let kout = (self.kmax + 1).min(n_band);
        let mut plus = FiberFunction::zeros(g, kout)?;
        let mut minus = FiberFunction::zeros(g, kout)?;
        plus.leakage = self.leakage;
        minus.leakage = self.leakage;
        for k in self.degrees() {
            let h = self.mode(k).unwrap();
            if h.iter().all(|v| *v == ZERO) {
                continue;
            }
            let (d, db) = g.wirtinger(h);
            let kf = k as f64;
            let p: Vec<C> = (0..h.len()).map(|i| (d[i] - g.dphi[i] * h[i] * kf) * g.e_neg_phi[i]).collect();
            let m: Vec<C> =
                (0..h.len()).map(|i| (db[i] + g.dphi[i].conj() * h[i] * kf) * g.e_neg_phi[i]).collect();
            if (k + 1).unsigned_abs() as usize <= kout {
                plus.mode_mut(k + 1).copy_from_slice(&p);
            } else {
                plus.leakage += self.grid_norm(&p);
            }
            if (k - 1).unsigned_abs() as usize <= kout {
                minus.mode_mut(k - 1).copy_from_slice(&m);
            } else {
                minus.leakage += self.grid_norm(&m);
            }
        }
        let norm = self.l2_norm();
        Ok((plus.check_leakage(norm)?, minus.check_leakage(norm)?))
    }

    pub fn eta_plus(&self) -> Result<FiberFunction> {
        Ok(self.ladder()?.0)
    }

    pub fn eta_minus(&self) -> Result<FiberFunction> {
        Ok(self.ladder()?.1)
    }

    pub fn apply_x(&self) -> Result<FiberFunction> {
        let (p, m) = self.ladder()?;
        Ok(p.add(&m))
    }

    pub fn apply_xperp(&self) -> Result<FiberFunction> {
        let (p, m) = self.ladder()?;
        Ok(p.combine(-I, &m, I))
    }

    /// `(X + λV)u`, with `λ` acting as a degree-0 multiplier.
    pub fn apply_generator(&self) -> Result<FiberFunction> {
        let mut out = self.apply_x()?;
        let lam = &self.grid.lambda;
        for k in self.degrees() {
            if k == 0 {
                continue;
            }
            let src = self.mode(k).unwrap();
            let kf = k as f64;
            for ((d, s), l) in out.mode_mut(k).iter_mut().zip(src).zip(lam) {
                *d += I * kf * *l * s;
            }
        }
        Ok(out)
    }

    /// Pointwise product of two functions on the unit tangent bundle.
    pub fn multiply(&self, other: &FiberFunction) -> Result<FiberFunction> {
        self.check_same_grid(other)?;
        let g = &self.grid;
        let kout = (self.kmax + other.kmax).min(g.band_limit());
        let mut out = FiberFunction::zeros(g, kout)?;
        let (a, b) = (self.offset, other.offset);
        out.offset = a * b;
        out.leakage = self.leakage * other.l2_norm() + other.leakage * self.l2_norm();
        let len = g.base().len();
        for i in self.degrees() {
            let ui = self.mode(i).unwrap();
            for j in other.degrees() {
                let vj = other.mode(j).unwrap();
                let k = i + j;
                if k.unsigned_abs() as usize > kout {
                    let prod: Vec<C> = (0..len).map(|p| ui[p] * vj[p]).collect();
                    out.leakage += self.grid_norm(&prod);
                    continue;
                }
                let dst = out.mode_mut(k);
                for p in 0..len {
                    dst[p] += ui[p] * vj[p];
                }
            }
        }
        if a != ZERO || b != ZERO {
            for k in out.degrees() {
                let (s, o) = (self.mode(k), other.mode(k));
                let dst = out.mode_mut(k);
                if let Some(o) = o {
                    for (d, v) in dst.iter_mut().zip(o) {
                        *d += a * v;
                    }
                }
                if let Some(s) = s {
                    for (d, v) in dst.iter_mut().zip(s) {
                        *d += b * v;
                    }
                }
            }
        }
        let scale = self.l2_norm() * other.l2_norm();
        out.check_leakage(scale)
    }

    /// Keep only degrees `|k| ≥ m + 1`.
    pub fn project_t(&self, m: i32) -> FiberFunction {
        let mut out = self.clone();
        if m < 0 {
            return out;
        }
        out.offset = ZERO;
        for k in self.degrees() {
            if k.abs() <= m {
                out.mode_mut(k).iter_mut().for_each(|v| *v = ZERO);
            }
        }
        out
    }

    /// `Pu = V(X + λV)u`.
    pub fn apply_p(&self) -> Result<FiberFunction> {
        Ok(self.apply_generator()?.apply_v())
    }

    /// `Qu = T V(X + λV)u` with `T` the projection onto `|k| ≥ m + 1`.
    pub fn apply_q(&self, m: i32) -> Result<FiberFunction> {
        Ok(self.apply_p()?.project_t(m))
    }

    /// `‖(X+λV)u‖ + ‖X⊥u‖ + ‖Vu‖ + ‖u‖`.
    pub fn h1_norm(&self) -> Result<f64> {
        Ok(self.apply_generator()?.l2_norm()
            + self.apply_xperp()?.l2_norm()
            + self.apply_v().l2_norm()
            + self.l2_norm())
    }
}

/// Magnetic curvature `𝕂 = K + X⊥λ + λ²` as a function of fiber degree ≤ 1.
pub fn magnetic_curvature_function(grid: &Arc<PhaseGrid>) -> Result<FiberFunction> {
    let kmax = 1.min(grid.band_limit());
    let mut out = FiberFunction::zeros(grid, kmax)?;
    let far = if grid.is_patch() {
        let c = grid.surface().lambda_const();
        -1.0 + c * c
    } else {
        0.0
    };
    let len = grid.base().len();
    {
        let m0 = out.mode_mut(0);
        for i in 0..len {
            let l = grid.lambda[i];
            m0[i] = C::new(grid.curvature[i] + l * l - far, 0.0);
        }
    }
    if kmax >= 1 {
        for i in 0..len {
            let [lx, ly] = grid.lambda_grad[i];
            let d = C::new(0.5 * lx, -0.5 * ly) * grid.e_neg_phi[i];
            out.mode_mut(1)[i] = -I * d;
            out.mode_mut(-1)[i] = I * d.conj();
        }
    }
    out.offset = C::new(far, 0.0);
    Ok(out)
}

/// `λ` as a degree-0 function.
pub fn lambda_function(grid: &Arc<PhaseGrid>) -> FiberFunction {
    let mut out = FiberFunction::zeros(grid, 0).unwrap();
    let far = if grid.is_patch() { grid.surface().lambda_const() } else { 0.0 };
    for (d, l) in out.mode_mut(0).iter_mut().zip(&grid.lambda) {
        *d = C::new(l - far, 0.0);
    }
    out.offset = C::new(far, 0.0);
    out
}

/// Gaussian curvature `K` as a degree-0 function.
pub fn curvature_function(grid: &Arc<PhaseGrid>) -> FiberFunction {
    let mut out = FiberFunction::zeros(grid, 0).unwrap();
    let far = if grid.is_patch() { -1.0 } else { 0.0 };
    for (d, k) in out.mode_mut(0).iter_mut().zip(&grid.curvature) {
        *d = C::new(k - far, 0.0);
    }
    out.offset = C::new(far, 0.0);
    out
}

/// Residuals of `[X, V] = X⊥`, `[V, X⊥] = X` and `[X, X⊥] = −KV` applied to
/// `u`, each relative to the H¹ norm of `u`.
pub fn frame_residuals(u: &FiberFunction) -> Result<[f64; 3]> {
    let h1 = u.h1_norm()?;
    if h1 == 0.0 {
        return Ok([0.0; 3]);
    }
    let x = u.apply_x()?;
    let xp = u.apply_xperp()?;
    let v = u.apply_v();
    let kv = curvature_function(u.grid()).multiply(&v)?;
    Ok([
        v.apply_x()?.sub(&x.apply_v()).sub(&xp).l2_norm() / h1,
        xp.apply_v().sub(&v.apply_xperp()?).sub(&x).l2_norm() / h1,
        xp.apply_x()?.sub(&x.apply_xperp()?).add(&kv).l2_norm() / h1,
    ])
}
