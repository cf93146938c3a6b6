//! Seeded random band-limited test functions, kept in analytic form so that
//! they can be resampled on any grid and evaluated pointwise.

use super::function::FiberFunction;
use super::grid::PhaseGrid;
use crate::error::Result;
use crate::geometry::{BaseFunction, SurfaceModel, TrigTerm, Window};
use num_complex::Complex64 as C;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `offset + Σ_k f_k(x) e^{ikθ}` with analytic base functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFiberFunction {
    pub offset: C,
    pub modes: Vec<(i32, BaseFunction)>,
}

impl AnalyticFiberFunction {
    pub fn constant(c: C) -> Self {
        Self { offset: c, modes: Vec::new() }
    }

    pub fn kmax(&self) -> usize {
        self.modes.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn mode_value(&self, k: i32, x: f64, y: f64) -> C {
        let mut v: C = self.modes.iter().filter(|(j, _)| *j == k).map(|(_, f)| f.value(x, y)).sum();
        if k == 0 {
            v += self.offset;
        }
        v
    }

    pub fn eval(&self, x: f64, y: f64, theta: f64) -> C {
        self.offset
            + self
                .modes
                .iter()
                .map(|(k, f)| f.value(x, y) * C::from_polar(1.0, *k as f64 * theta))
                .sum::<C>()
    }

    pub fn sample(&self, grid: &Arc<PhaseGrid>) -> Result<FiberFunction> {
        let mut u = FiberFunction::zeros(grid, self.kmax())?;
        let pts: Vec<(f64, f64)> = grid.base().points().collect();
        for (k, f) in &self.modes {
            let m = u.mode_mut(*k);
            for (v, &(x, y)) in m.iter_mut().zip(&pts) {
                *v += f.value(x, y);
            }
        }
        u.set_offset(self.offset);
        Ok(u)
    }

    pub fn scaled(&self, s: C) -> Self {
        Self { offset: self.offset * s, modes: self.modes.iter().map(|(k, f)| (*k, f.scaled(s))).collect() }
    }
}

/// Parameters of the random family.
///
/// Coefficients are complex Gaussians with decay `(1 + k²)⁻¹ (1 + |n|²)⁻²`
/// over fiber degree `k` and base frequency `n`. On the octagon each degree is
/// additionally multiplied by a narrow Gaussian window around a random centre
/// near the origin, which keeps it supported inside the fundamental domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFiberSpec {
    pub min_degree: usize,
    pub max_degree: usize,
    pub base_band: i32,
    pub real: bool,
    /// Random constant added on top (ignored when `min_degree > 0`).
    pub with_offset: bool,
}

impl Default for RandomFiberSpec {
    fn default() -> Self {
        Self { min_degree: 0, max_degree: 4, base_band: 3, real: false, with_offset: true }
    }
}

pub const WINDOW_SIGMA: f64 = 0.065;
pub const WINDOW_CENTER_RADIUS: f64 = 0.08;

fn normal_c<R: Rng + ?Sized>(rng: &mut R) -> C {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn random_base<R: Rng + ?Sized>(model: SurfaceModel, k: i32, band: i32, rng: &mut R) -> BaseFunction {
    let mut terms = Vec::new();
    let fk = 1.0 / (1.0 + (k * k) as f64);
    for n1 in -band..=band {
        for n2 in -band..=band {
            let nn = (n1 * n1 + n2 * n2) as f64;
            let c = normal_c(rng) * fk / (1.0 + nn).powi(2);
            terms.push(TrigTerm { n: [n1, n2], c });
        }
    }
    match model {
        SurfaceModel::FlatTorusConformal => BaseFunction::trig(terms),
        SurfaceModel::BolzaOctagon => {
            let r = WINDOW_CENTER_RADIUS * rng.random::<f64>().sqrt();
            let a = std::f64::consts::TAU * rng.random::<f64>();
            let center = [r * a.cos(), r * a.sin()];
            BaseFunction::windowed(terms, 1.0, center, Window::Gaussian { center, sigma: WINDOW_SIGMA })
        }
    }
}

pub fn random_fiber_function<R: Rng + ?Sized>(
    model: SurfaceModel,
    spec: &RandomFiberSpec,
    rng: &mut R,
) -> AnalyticFiberFunction {
    let mut modes = Vec::new();
    let top = spec.max_degree as i32;
    let bottom = spec.min_degree as i32;
    if spec.real {
        for k in 0..=top {
            if k < bottom {
                continue;
            }
            let f = random_base(model, k, spec.base_band, rng);
            if k == 0 {
                modes.push((0, f.real_part()));
            } else {
                modes.push((-k, f.conj()));
                modes.push((k, f));
            }
        }
    } else {
        for k in -top..=top {
            if k.abs() < bottom {
                continue;
            }
            modes.push((k, random_base(model, k, spec.base_band, rng)));
        }
    }
    let offset = if spec.with_offset && bottom == 0 {
        let c = normal_c(rng);
        if spec.real {
            C::new(c.re, 0.0)
        } else {
            c
        }
    } else {
        C::new(0.0, 0.0)
    };
    AnalyticFiberFunction { offset, modes }
}
