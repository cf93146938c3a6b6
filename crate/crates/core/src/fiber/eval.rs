//! Pointwise evaluation of grid-stored fiber functions.
//!
//! Each degree is upsampled spectrally by zero padding and then interpolated
//! locally with tensor-product Lagrange stencils, which is accurate to near
//! round-off for well-resolved data and costs `O(stencil²)` per point.

use super::function::FiberFunction;
use super::grid::{BaseGrid, Fft2};
use num_complex::Complex64 as C;

#[derive(Clone, Debug)]
pub struct PointEvaluator {
    base: BaseGrid,
    n_up: usize,
    kmax: usize,
    modes: Vec<Vec<C>>,
    active: Vec<bool>,
    offset: C,
    patch: bool,
    stencil: usize,
}

pub const DEFAULT_UPSAMPLE: usize = 4;
pub const DEFAULT_STENCIL: usize = 8;

fn signed_bin(m: usize, n: usize) -> Option<i64> {
    let (m, n) = (m as i64, n as i64);
    if 2 * m < n {
        Some(m)
    } else if 2 * m == n {
        None
    } else {
        Some(m - n)
    }
}

impl FiberFunction {
    pub fn evaluator(&self) -> PointEvaluator {
        self.evaluator_with(DEFAULT_UPSAMPLE, DEFAULT_STENCIL)
    }

    pub fn evaluator_with(&self, upsample: usize, stencil: usize) -> PointEvaluator {
        let base = *self.grid.base();
        let n = base.n;
        let n_up = n * upsample;
        let fft = &self.grid.fft;
        let fft_up = Fft2::new(n_up);
        let mut modes = Vec::with_capacity(2 * self.kmax + 1);
        let mut active = Vec::with_capacity(2 * self.kmax + 1);
        for k in self.degrees() {
            let h = self.mode(k).unwrap();
            if h.iter().all(|v| v.norm_sqr() == 0.0) {
                modes.push(Vec::new());
                active.push(false);
                continue;
            }
            let mut spec = h.to_vec();
            fft.forward(&mut spec);
            let mut up = vec![C::new(0.0, 0.0); n_up * n_up];
            for my in 0..n {
                let Some(sy) = signed_bin(my, n) else { continue };
                let ty = sy.rem_euclid(n_up as i64) as usize;
                for mx in 0..n {
                    let Some(sx) = signed_bin(mx, n) else { continue };
                    let tx = sx.rem_euclid(n_up as i64) as usize;
                    up[ty * n_up + tx] = spec[my * n + mx];
                }
            }
            fft_up.inverse(&mut up);
            let s = (upsample * upsample) as f64;
            up.iter_mut().for_each(|v| *v *= s);
            modes.push(up);
            active.push(true);
        }
        PointEvaluator {
            base,
            n_up,
            kmax: self.kmax,
            modes,
            active,
            offset: self.offset,
            patch: self.grid.is_patch(),
            stencil,
        }
    }

    /// Exact trigonometric interpolation of degree `k` at `(x, y)`; `O(n²)`.
    pub fn eval_mode_exact(&self, k: i32, x: f64, y: f64) -> C {
        let Some(h) = self.mode(k) else { return C::new(0.0, 0.0) };
        let base = self.grid.base();
        let n = base.n;
        let mut spec = h.to_vec();
        self.grid.fft.forward(&mut spec);
        let (u, v) = (x - base.origin[0], y - base.origin[1]);
        let mut s = C::new(0.0, 0.0);
        for my in 0..n {
            let Some(sy) = signed_bin(my, n) else { continue };
            for mx in 0..n {
                let Some(sx) = signed_bin(mx, n) else { continue };
                let arg = std::f64::consts::TAU * (sx as f64 * u + sy as f64 * v) / base.length;
                s += spec[my * n + mx] * C::from_polar(1.0, arg);
            }
        }
        let mut out = s / (n * n) as f64;
        if k == 0 {
            out += self.offset;
        }
        out
    }

    pub fn eval_exact(&self, x: f64, y: f64, theta: f64) -> C {
        let mut s = C::new(0.0, 0.0);
        for k in self.degrees() {
            let mut v = self.eval_mode_exact(k, x, y);
            if k == 0 {
                v -= self.offset;
            }
            s += v * C::from_polar(1.0, k as f64 * theta);
        }
        s + self.offset
    }
}

fn lagrange_weights(s: f64, p: usize, out: &mut [f64]) {
    // nodes at j - (p/2 - 1), j = 0..p, relative to the cell's left node
    let shift = (p / 2 - 1) as f64;
    for j in 0..p {
        let xj = j as f64 - shift;
        let mut w = 1.0;
        for m in 0..p {
            if m != j {
                let xm = m as f64 - shift;
                w *= (s - xm) / (xj - xm);
            }
        }
        out[j] = w;
    }
}

impl PointEvaluator {
    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Values `u_k(x, y)` for all stored degrees, written into `out`
    /// (`out[k + kmax]`), excluding the offset.
    pub fn eval_modes(&self, x: f64, y: f64, out: &mut [C]) {
        out.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        let h = self.base.length / self.n_up as f64;
        let tx = (x - self.base.origin[0]) / h;
        let ty = (y - self.base.origin[1]) / h;
        let n = self.n_up as f64;
        if self.patch && (tx < 0.0 || ty < 0.0 || tx >= n || ty >= n) {
            return;
        }
        let p = self.stencil;
        let (fx, fy) = (tx.floor(), ty.floor());
        let mut wx = [0.0; 16];
        let mut wy = [0.0; 16];
        lagrange_weights(tx - fx, p, &mut wx);
        lagrange_weights(ty - fy, p, &mut wy);
        let nu = self.n_up as i64;
        let shift = (p / 2 - 1) as i64;
        let mut ix = [0usize; 16];
        let mut iy = [0usize; 16];
        for j in 0..p {
            ix[j] = (fx as i64 + j as i64 - shift).rem_euclid(nu) as usize;
            iy[j] = (fy as i64 + j as i64 - shift).rem_euclid(nu) as usize;
        }
        for (slot, (m, act)) in out.iter_mut().zip(self.modes.iter().zip(&self.active)) {
            if !*act {
                continue;
            }
            let mut s = C::new(0.0, 0.0);
            for b in 0..p {
                let row = &m[iy[b] * self.n_up..(iy[b] + 1) * self.n_up];
                let mut r = C::new(0.0, 0.0);
                for a in 0..p {
                    r += row[ix[a]] * wx[a];
                }
                s += r * wy[b];
            }
            *slot = s;
        }
    }

    pub fn eval(&self, x: f64, y: f64, theta: f64) -> C {
        let mut buf = vec![C::new(0.0, 0.0); 2 * self.kmax + 1];
        self.eval_modes(x, y, &mut buf);
        let mut s = self.offset;
        let e1 = C::from_polar(1.0, theta);
        let mut e = C::from_polar(1.0, -(self.kmax as f64) * theta);
        for v in &buf {
            s += v * e;
            e *= e1;
        }
        s
    }
}
