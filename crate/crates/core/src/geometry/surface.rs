//! Closed surfaces in isothermal charts, `g = e^{2φ}(dx² + dy²)`, carrying a
//! magnetic intensity `λ`.

use super::field::BaseFunction;
use super::fuchsian::{FuchsianGroup, Letter, Mobius};
use super::PhasePoint;
use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceModel {
    /// `[0,1)²` with a periodic conformal factor.
    FlatTorusConformal,
    /// Regular hyperbolic octagon in the Poincaré disk.
    BolzaOctagon,
}

/// Conformal factor `φ` together with first and second derivatives.
#[derive(Clone, Copy, Debug)]
pub struct PhiJet {
    pub phi: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

/// A deck transformation, as recorded when a point is pulled back into the
/// fundamental domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Deck {
    Translation([i64; 2]),
    Fuchsian { map: Mobius, word: Vec<Letter> },
}

impl Deck {
    pub fn identity(model: SurfaceModel) -> Self {
        match model {
            SurfaceModel::FlatTorusConformal => Deck::Translation([0, 0]),
            SurfaceModel::BolzaOctagon => Deck::Fuchsian { map: Mobius::identity(), word: Vec::new() },
        }
    }

    pub fn act(&self, p: PhasePoint) -> PhasePoint {
        match self {
            Deck::Translation(s) => PhasePoint::new(p.x + s[0] as f64, p.y + s[1] as f64, p.theta),
            Deck::Fuchsian { map, .. } => {
                let (x, y, t) = map.act(p.x, p.y, p.theta);
                PhasePoint::new(x, y, t)
            }
        }
    }

    pub fn jacobian(&self, p: PhasePoint) -> [[f64; 3]; 3] {
        match self {
            Deck::Translation(_) => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Deck::Fuchsian { map, .. } => map.act_jacobian(p.x, p.y),
        }
    }

    /// `later ∘ self`.
    pub fn then(&self, later: &Deck) -> Deck {
        match (self, later) {
            (Deck::Translation(a), Deck::Translation(b)) => Deck::Translation([a[0] + b[0], a[1] + b[1]]),
            (Deck::Fuchsian { map: m1, word: w1 }, Deck::Fuchsian { map: m2, word: w2 }) => {
                let mut word = w1.clone();
                word.extend_from_slice(w2);
                Deck::Fuchsian { map: m2.compose(m1), word }
            }
            _ => panic!("mixing deck groups of different surfaces"),
        }
    }

    pub fn inverse(&self) -> Deck {
        match self {
            Deck::Translation(s) => Deck::Translation([-s[0], -s[1]]),
            Deck::Fuchsian { map, word } => Deck::Fuchsian {
                map: map.inverse(),
                word: word.iter().rev().map(|&k| FuchsianGroup::inverse_letter(k)).collect(),
            },
        }
    }

    pub fn word_string(&self) -> String {
        match self {
            Deck::Translation(s) => format!("({},{})", s[0], s[1]),
            Deck::Fuchsian { word, .. } => FuchsianGroup::word_string(word),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Deck::Translation(s) => *s == [0, 0],
            Deck::Fuchsian { word, .. } => word.is_empty(),
        }
    }
}

/// Magnetic surface `(M, g, λ)`.
///
/// The magnetic intensity is `λ = lambda_const + Re(lambda_var)`. On the torus
/// `lambda_var` is a periodic trigonometric polynomial; on the octagon it must
/// be invariant under the side pairings, which in practice means a windowed
/// function supported away from the boundary.
#[derive(Clone, Debug)]
pub struct MagneticSurface {
    model: SurfaceModel,
    phi: BaseFunction,
    lambda_const: f64,
    lambda_var: Option<BaseFunction>,
    group: Option<FuchsianGroup>,
    area: f64,
    max_metric_factor: std::sync::OnceLock<f64>,
}

fn check_real(f: &BaseFunction, what: &str) -> Result<()> {
    for &(x, y) in &[(0.123, 0.456), (0.77, 0.31), (0.05, 0.91)] {
        if f.value(x, y).im.abs() > 1e-12 * (1.0 + f.value(x, y).norm()) {
            return Err(Error::Precondition(format!("{what} must be real-valued")));
        }
    }
    Ok(())
}

impl MagneticSurface {
    /// Flat torus with constant intensity.
    pub fn flat_torus(lambda: f64) -> Self {
        Self::torus(BaseFunction::zero(), BaseFunction::constant(lambda)).expect("flat torus")
    }

    /// Torus with periodic conformal factor and intensity.
    pub fn torus(phi: BaseFunction, lambda: BaseFunction) -> Result<Self> {
        for (f, name) in [(&phi, "phi"), (&lambda, "lambda")] {
            if f.window.is_some() || f.period != 1.0 {
                return Err(Error::Precondition(format!("{name} must be a unit-periodic trigonometric polynomial")));
            }
            check_real(f, name)?;
        }
        let mut s = Self {
            model: SurfaceModel::FlatTorusConformal,
            phi,
            lambda_const: 0.0,
            lambda_var: Some(lambda),
            group: None,
            area: 0.0,
            max_metric_factor: Default::default(),
        };
        if let Some(c) = s.lambda_var.as_ref().and_then(|f| f.as_constant()) {
            s.lambda_const = c.re;
            s.lambda_var = None;
        }
        s.area = s.torus_area();
        Ok(s)
    }

    /// Bolza surface with constant intensity.
    pub fn bolza(lambda: f64) -> Self {
        let group = FuchsianGroup::bolza();
        let area = group.domain_area();
        Self {
            model: SurfaceModel::BolzaOctagon,
            phi: BaseFunction::zero(),
            lambda_const: lambda,
            lambda_var: None,
            group: Some(group),
            area,
            max_metric_factor: Default::default(),
        }
    }

    /// Bolza surface with intensity `lambda_const + Re(variation)`, where the
    /// variation has to match across paired sides.
    pub fn bolza_with_variation(lambda_const: f64, variation: BaseFunction) -> Result<Self> {
        check_real(&variation.real_part(), "lambda")?;
        let mut s = Self::bolza(lambda_const);
        s.lambda_var = Some(variation);
        s.check_lambda_invariance(1e-10)?;
        Ok(s)
    }

    fn check_lambda_invariance(&self, tol: f64) -> Result<()> {
        let Some(group) = &self.group else { return Ok(()) };
        for (z, k) in group.boundary_samples(16) {
            let w = group.generator(FuchsianGroup::inverse_letter(k as u8)).apply(z);
            let gap = (self.lambda(z.re, z.im) - self.lambda(w.re, w.im)).abs();
            if gap > tol {
                return Err(Error::Precondition(format!(
                    "lambda is not invariant under the side pairing ({gap:.2e} at side {k})"
                )));
            }
        }
        Ok(())
    }

    fn torus_area(&self) -> f64 {
        let n = 128;
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                let phi = self.phi.value(i as f64 / n as f64, j as f64 / n as f64).re;
                s += (2.0 * phi).exp();
            }
        }
        s / (n * n) as f64
    }

    pub fn model(&self) -> SurfaceModel {
        self.model
    }

    pub fn group(&self) -> Option<&FuchsianGroup> {
        self.group.as_ref()
    }

    pub fn surface_area(&self) -> f64 {
        self.area
    }

    /// Constant part of `λ`; on the octagon this is also its value near the
    /// boundary.
    pub fn lambda_const(&self) -> f64 {
        self.lambda_const
    }

    pub fn lambda_variation(&self) -> Option<&BaseFunction> {
        self.lambda_var.as_ref()
    }

    pub fn conformal_factor(&self) -> &BaseFunction {
        &self.phi
    }

    /// Copy of the surface with the intensity scaled by `s`.
    pub fn with_lambda_scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.lambda_const *= s;
        out.lambda_var = out.lambda_var.map(|f| f.scaled(C::new(s, 0.0)));
        out
    }

    /// Copy of the surface with `λ` replaced by `-λ`.
    pub fn reversed(&self) -> Self {
        self.with_lambda_scaled(-1.0)
    }

    /// Whether two surfaces carry the same metric and intensity.
    pub fn same_system(&self, other: &MagneticSurface) -> bool {
        self.model == other.model
            && self.phi == other.phi
            && self.lambda_const == other.lambda_const
            && self.lambda_var == other.lambda_var
    }

    pub fn in_chart(&self, x: f64, y: f64) -> bool {
        match self.model {
            SurfaceModel::FlatTorusConformal => x.is_finite() && y.is_finite(),
            SurfaceModel::BolzaOctagon => x * x + y * y < 1.0,
        }
    }

    pub fn phi_jet(&self, x: f64, y: f64) -> Result<PhiJet> {
        match self.model {
            SurfaceModel::FlatTorusConformal => {
                let j = self.phi.jet(x, y);
                Ok(PhiJet {
                    phi: j.value.re,
                    grad: [j.grad[0].re, j.grad[1].re],
                    hess: [j.hess[0].re, j.hess[1].re, j.hess[2].re],
                })
            }
            SurfaceModel::BolzaOctagon => {
                let om = 1.0 - x * x - y * y;
                if !(om > 0.0) {
                    return Err(Error::Domain(x, y));
                }
                let q = 4.0 / (om * om);
                Ok(PhiJet {
                    phi: (2.0 / om).ln(),
                    grad: [2.0 * x / om, 2.0 * y / om],
                    hess: [2.0 / om + q * x * x, q * x * y, 2.0 / om + q * y * y],
                })
            }
        }
    }

    /// `e^{2φ}`.
    pub fn metric_factor(&self, x: f64, y: f64) -> Result<f64> {
        Ok((2.0 * self.phi_jet(x, y)?.phi).exp())
    }

    /// `K = -e^{-2φ} Δφ`.
    pub fn gauss_curvature(&self, x: f64, y: f64) -> Result<f64> {
        let j = self.phi_jet(x, y)?;
        Ok(-(-2.0 * j.phi).exp() * (j.hess[0] + j.hess[2]))
    }

    pub fn lambda(&self, x: f64, y: f64) -> f64 {
        self.lambda_const + self.lambda_var.as_ref().map_or(0.0, |f| f.value(x, y).re)
    }

    pub fn lambda_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.lambda_var.as_ref().map_or([0.0, 0.0], |f| {
            let g = f.gradient(x, y);
            [g[0].re, g[1].re]
        })
    }

    pub fn has_constant_lambda(&self) -> bool {
        self.lambda_var.is_none()
    }

    /// `𝕂 = K + X⊥λ + λ²` at a point of the unit tangent bundle.
    pub fn magnetic_curvature(&self, p: PhasePoint) -> Result<f64> {
        let j = self.phi_jet(p.x, p.y)?;
        let k = -(-2.0 * j.phi).exp() * (j.hess[0] + j.hess[2]);
        let l = self.lambda(p.x, p.y);
        let g = self.lambda_gradient(p.x, p.y);
        let (s, c) = p.theta.sin_cos();
        let xperp = (-j.phi).exp() * (s * g[0] - c * g[1]);
        Ok(k + xperp + l * l)
    }

    /// Pull a base point into the fundamental domain.
    pub fn reduce_to_domain(&self, x: f64, y: f64) -> Result<((f64, f64), Deck)> {
        let (p, d) = self.reduce_phase(PhasePoint::new(x, y, 0.0))?;
        Ok(((p.x, p.y), d))
    }

    /// Pull a point of the unit tangent bundle into the fundamental domain.
    pub fn reduce_phase(&self, p: PhasePoint) -> Result<(PhasePoint, Deck)> {
        match self.model {
            SurfaceModel::FlatTorusConformal => {
                if !(p.x.is_finite() && p.y.is_finite()) {
                    return Err(Error::Domain(p.x, p.y));
                }
                let s = [-p.x.floor() as i64, -p.y.floor() as i64];
                let d = Deck::Translation(s);
                let mut q = d.act(p);
                // guard against x = 1 - ulp rounding to exactly 1
                if q.x >= 1.0 {
                    q.x = 0.0;
                }
                if q.y >= 1.0 {
                    q.y = 0.0;
                }
                Ok((q, d))
            }
            SurfaceModel::BolzaOctagon => {
                let group = self.group.as_ref().expect("octagon carries a group");
                let (_, map, word) = group.reduce(C::new(p.x, p.y))?;
                let d = Deck::Fuchsian { map, word };
                Ok((d.act(p), d))
            }
        }
    }

    pub fn in_domain(&self, x: f64, y: f64, tol: f64) -> bool {
        match self.model {
            SurfaceModel::FlatTorusConformal => (-tol..1.0 + tol).contains(&x) && (-tol..1.0 + tol).contains(&y),
            SurfaceModel::BolzaOctagon => self.group.as_ref().unwrap().contains(C::new(x, y), tol),
        }
    }

    /// A point of the unit tangent bundle drawn from the normalized
    /// Liouville measure: density `e^{2φ}` on the fundamental domain and
    /// uniform angle.
    pub fn sample_liouville<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let theta = -PI + 2.0 * PI * rng.random::<f64>();
        match self.model {
            SurfaceModel::BolzaOctagon => {
                // hyperbolic area inside Euclidean radius r is 2πA(r) with
                // A(r) = 2r²/(1 − r²); invert for r and reject outside the octagon
                let group = self.group.as_ref().expect("octagon carries a group");
                let rv = group.vertex_radius();
                let a_max = 2.0 * rv * rv / (1.0 - rv * rv);
                loop {
                    let a = a_max * rng.random::<f64>();
                    let r = (a / (2.0 + a)).sqrt();
                    let z = C::from_polar(r, 2.0 * PI * rng.random::<f64>());
                    if group.contains(z, 0.0) {
                        return PhasePoint::new(z.re, z.im, theta);
                    }
                }
            }
            SurfaceModel::FlatTorusConformal => {
                let bound = self.max_metric_factor.get_or_init(|| {
                    let n = 64;
                    let mut m: f64 = 0.0;
                    for j in 0..n {
                        for i in 0..n {
                            m = m.max(self.phi.value(i as f64 / n as f64, j as f64 / n as f64).re);
                        }
                    }
                    // margin for the maximum between grid points
                    (2.0 * m).exp() * 1.2
                });
                loop {
                    let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
                    let w = (2.0 * self.phi.value(x, y).re).exp();
                    if rng.random::<f64>() * bound <= w {
                        return PhasePoint::new(x, y, theta);
                    }
                }
            }
        }
    }

    /// Riemannian volume of the unit tangent bundle, `2π · Area`.
    pub fn phase_volume(&self) -> f64 {
        2.0 * PI * self.area
    }

    /// Supremum of `-𝕂` estimated on a sample of the unit tangent bundle
    /// (exact when `𝕂` is constant).
    pub fn max_negative_magnetic_curvature(&self) -> Result<f64> {
        if self.model == SurfaceModel::BolzaOctagon && self.has_constant_lambda() {
            return Ok(1.0 - self.lambda_const * self.lambda_const);
        }
        let mut best = f64::NEG_INFINITY;
        let n = 48;
        let group = self.group.as_ref();
        for j in 0..n {
            for i in 0..n {
                let (x, y) = match self.model {
                    SurfaceModel::FlatTorusConformal => (i as f64 / n as f64, j as f64 / n as f64),
                    SurfaceModel::BolzaOctagon => {
                        let v = group.unwrap().vertex_radius();
                        (-v + 2.0 * v * i as f64 / (n - 1) as f64, -v + 2.0 * v * j as f64 / (n - 1) as f64)
                    }
                };
                if !self.in_domain(x, y, 0.0) {
                    continue;
                }
                for t in 0..32 {
                    let th = 2.0 * PI * t as f64 / 32.0;
                    best = best.max(-self.magnetic_curvature(PhasePoint::new(x, y, th))?);
                }
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::RealTerm;

    fn bumpy_torus() -> MagneticSurface {
        let phi = BaseFunction::from_real_terms(&[
            RealTerm { n: [1, 0], cos: 0.1, sin: 0.05 },
            RealTerm { n: [0, 1], cos: -0.07, sin: 0.0 },
        ]);
        let lam = BaseFunction::from_real_terms(&[
            RealTerm { n: [0, 0], cos: 0.3, sin: 0.0 },
            RealTerm { n: [1, 1], cos: 0.1, sin: 0.2 },
        ]);
        MagneticSurface::torus(phi, lam).unwrap()
    }

    #[test]
    fn bolza_closed_forms() {
        let s = MagneticSurface::bolza(0.2);
        for &(x, y) in &[(0.0, 0.0), (0.3, -0.1), (-0.5, 0.4)] {
            assert!((s.gauss_curvature(x, y).unwrap() + 1.0).abs() < 1e-12);
            let r2 = x * x + y * y;
            assert!((s.metric_factor(x, y).unwrap() - 4.0 / (1.0 - r2) / (1.0 - r2)).abs() < 1e-12);
            let kk = s.magnetic_curvature(PhasePoint::new(x, y, 1.0)).unwrap();
            assert!((kk - (-1.0 + 0.04)).abs() < 1e-12);
        }
        assert!((s.surface_area() - 4.0 * PI).abs() < 1e-10);
        assert!(matches!(s.gauss_curvature(1.0, 0.0), Err(Error::Domain(..))));
    }

    #[test]
    fn torus_curvature_integrates_to_zero() {
        // Gauss–Bonnet on the torus
        let s = bumpy_torus();
        let n = 64;
        let mut total = 0.0;
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                total += s.gauss_curvature(x, y).unwrap() * s.metric_factor(x, y).unwrap();
            }
        }
        assert!((total / (n * n) as f64).abs() < 1e-13);
    }

    #[test]
    fn torus_reduction() {
        let s = MagneticSurface::flat_torus(0.0);
        let ((x, y), d) = s.reduce_to_domain(1.25, -0.5).unwrap();
        assert!((x - 0.25).abs() < 1e-15 && (y - 0.5).abs() < 1e-15);
        assert_eq!(d, Deck::Translation([-1, 1]));
    }

    #[test]
    fn non_invariant_lambda_is_rejected() {
        use crate::geometry::field::{TrigTerm, Window};
        let wide = BaseFunction::windowed(
            vec![TrigTerm { n: [0, 0], c: C::new(0.1, 0.0) }],
            1.0,
            [0.0, 0.0],
            Window::Gaussian { center: [0.3, 0.0], sigma: 0.3 },
        );
        assert!(MagneticSurface::bolza_with_variation(0.1, wide).is_err());
        let narrow = BaseFunction::windowed(
            vec![TrigTerm { n: [0, 0], c: C::new(0.1, 0.0) }],
            1.0,
            [0.0, 0.0],
            Window::Bump { center: [0.0, 0.0], radius: 0.5 },
        );
        assert!(MagneticSurface::bolza_with_variation(0.1, narrow).is_ok());
    }

    #[test]
    fn magnetic_curvature_matches_frame_formula() {
        let s = bumpy_torus();
        let p = PhasePoint::new(0.3, 0.7, 0.4);
        let j = s.phi_jet(p.x, p.y).unwrap();
        let g = s.lambda_gradient(p.x, p.y);
        let (sn, cs) = p.theta.sin_cos();
        let xperp = (-j.phi).exp() * (sn * g[0] - cs * g[1]);
        let l = s.lambda(p.x, p.y);
        let expect = s.gauss_curvature(p.x, p.y).unwrap() + xperp + l * l;
        assert!((s.magnetic_curvature(p).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn liouville_samples_follow_the_area_form() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 40_000;
        // hyperbolic area inside Euclidean radius 0.3 over the total 4π
        let b = MagneticSurface::bolza(0.2);
        let inside = (0..n).filter(|_| {
            let p = b.sample_liouville(&mut rng);
            p.x.hypot(p.y) < 0.3
        });
        let frac = inside.count() as f64 / n as f64;
        let expect = 0.09 / 0.91;
        assert!((frac - expect).abs() < 4.0 * (expect * (1.0 - expect) / n as f64).sqrt(), "{frac} vs {expect}");

        // E[e^{-2φ}] = 1 / area on the torus
        let t = bumpy_torus();
        let m = (0..n)
            .map(|_| {
                let p = t.sample_liouville(&mut rng);
                (-2.0 * t.phi.value(p.x, p.y).re).exp()
            })
            .sum::<f64>()
            / n as f64;
        assert!((m * t.surface_area() - 1.0).abs() < 0.01, "{m}");
    }
}
