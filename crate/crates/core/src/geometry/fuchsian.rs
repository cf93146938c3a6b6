//! Möbius transformations of the unit disk and the Bolza surface group.

use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `z ↦ (a z + b)/(c z + d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mobius {
    pub fn identity() -> Self {
        let (o, z) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
        Self { a: o, b: z, c: z, d: o }
    }

    pub fn apply(&self, z: C) -> C {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }

    pub fn derivative(&self, z: C) -> C {
        let q = self.c * z + self.d;
        self.det() / (q * q)
    }

    /// `self ∘ other`.
    pub fn compose(&self, o: &Mobius) -> Mobius {
        Mobius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Mobius {
        let det = self.det();
        Mobius { a: self.d / det, b: -self.b / det, c: -self.c / det, d: self.a / det }
    }

    /// Trace after normalising to unit determinant.
    pub fn trace(&self) -> C {
        (self.a + self.d) / self.det().sqrt()
    }

    pub fn distance_to(&self, o: &Mobius) -> f64 {
        ((self.a - o.a).norm() + (self.b - o.b).norm() + (self.c - o.c).norm() + (self.d - o.d).norm())
            .max(0.0)
    }

    /// Action on the unit tangent bundle in isothermal chart coordinates:
    /// `(z, θ) ↦ (g z, θ + arg g'(z))`.
    pub fn act(&self, x: f64, y: f64, theta: f64) -> (f64, f64, f64) {
        let z = C::new(x, y);
        let w = self.apply(z);
        (w.re, w.im, theta + self.derivative(z).arg())
    }

    /// Jacobian of [`Mobius::act`] with respect to `(x, y, θ)`.
    pub fn act_jacobian(&self, x: f64, y: f64) -> [[f64; 3]; 3] {
        let z = C::new(x, y);
        let g = self.derivative(z);
        // d/dz log g'(z) = -2c/(cz + d)
        let l = -2.0 * self.c / (self.c * z + self.d);
        [[g.re, -g.im, 0.0], [g.im, g.re, 0.0], [l.im, l.re, 1.0]]
    }
}

/// Hyperbolic distance in the Poincaré disk.
pub fn disk_distance(z: C, w: C) -> f64 {
    let num = 2.0 * (z - w).norm_sqr();
    let den = (1.0 - z.norm_sqr()) * (1.0 - w.norm_sqr());
    (1.0 + num / den).acosh()
}

pub type Letter = u8;

/// Side-pairing generators of a Dirichlet domain centred at the origin.
#[derive(Clone, Debug)]
pub struct FuchsianGroup {
    generators: Vec<Mobius>,
    origin_images: Vec<C>,
    inradius: f64,
    word_cap: usize,
}

const LETTERS: [char; 8] = ['a', 'b', 'c', 'd', 'A', 'B', 'C', 'D'];

impl FuchsianGroup {
    /// Genus-2 group of the regular octagon with interior angles `π/4`.
    pub fn bolza() -> Self {
        let s = 1.0 + 2f64.sqrt();
        let t = (2.0 + 2.0 * 2f64.sqrt()).sqrt();
        let generators: Vec<Mobius> = (0..8)
            .map(|k| {
                let e = C::from_polar(1.0, k as f64 * PI / 4.0);
                Mobius { a: C::new(s, 0.0), b: e * t, c: e.conj() * t, d: C::new(s, 0.0) }
            })
            .collect();
        let origin_images: Vec<C> = generators.iter().map(|g| g.apply(C::new(0.0, 0.0))).collect();
        let d0 = disk_distance(C::new(0.0, 0.0), origin_images[0]);
        Self { generators, origin_images, inradius: (d0 / 4.0).tanh(), word_cap: 64 }
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, k: Letter) -> &Mobius {
        &self.generators[k as usize]
    }

    pub fn inverse_letter(k: Letter) -> Letter {
        (k + 4) % 8
    }

    pub fn letter_char(k: Letter) -> char {
        LETTERS[k as usize]
    }

    pub fn word_string(word: &[Letter]) -> String {
        word.iter().map(|&k| Self::letter_char(k)).collect()
    }

    pub fn parse_word(s: &str) -> Option<Vec<Letter>> {
        s.chars().map(|c| LETTERS.iter().position(|&l| l == c).map(|p| p as Letter)).collect()
    }

    /// Group element of a word, read left to right as a product.
    pub fn element(&self, word: &[Letter]) -> Mobius {
        word.iter().fold(Mobius::identity(), |m, &k| m.compose(&self.generators[k as usize]))
    }

    /// The defining relation of the group.
    pub fn relator() -> Vec<Letter> {
        vec![0, 3, 6, 1, 4, 7, 2, 5]
    }

    /// Euclidean radius of the side midpoints.
    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Euclidean radius of the octagon vertices.
    pub fn vertex_radius(&self) -> f64 {
        self.boundary_radius(PI / 8.0)
    }

    /// Boundary radius along the ray at angle offset `delta ∈ [-π/8, π/8]`
    /// from a side midpoint.
    pub fn boundary_radius(&self, delta: f64) -> f64 {
        let r = self.inradius;
        let dd = (1.0 + r * r) / (2.0 * r);
        let c = dd * delta.cos();
        c - (c * c - 1.0).sqrt()
    }

    /// Largest violation of the Dirichlet inequalities at `z` and the
    /// generator index responsible.
    fn worst_side(&self, z: C) -> (f64, usize) {
        let z2 = z.norm_sqr();
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, w) in self.origin_images.iter().enumerate() {
            let excess = z2 - (z - w).norm_sqr() / (1.0 - w.norm_sqr());
            if excess > best.0 {
                best = (excess, k);
            }
        }
        best
    }

    pub fn contains(&self, z: C, tol: f64) -> bool {
        z.norm_sqr() < 1.0 && self.worst_side(z).0 <= tol
    }

    /// Map `z` into the closed fundamental domain. Returns the image, the
    /// accumulated transformation and the letters applied in order.
    pub fn reduce(&self, z: C) -> Result<(C, Mobius, Vec<Letter>)> {
        if !(z.norm_sqr() < 1.0) {
            return Err(Error::Domain(z.re, z.im));
        }
        let mut z = z;
        let mut m = Mobius::identity();
        let mut word = Vec::new();
        loop {
            let (excess, k) = self.worst_side(z);
            if excess <= 1e-13 {
                return Ok((z, m, word));
            }
            if word.len() >= self.word_cap {
                return Err(Error::WordCap(self.word_cap));
            }
            let inv = Self::inverse_letter(k as Letter);
            let g = &self.generators[inv as usize];
            z = g.apply(z);
            m = g.compose(&m);
            word.push(inv);
        }
    }

    /// Hyperbolic area of the octagon by polar quadrature.
    pub fn domain_area(&self) -> f64 {
        let rule = crate::quadrature::gauss_legendre_on(48, -PI / 8.0, PI / 8.0);
        let sector: f64 = rule
            .iter()
            .map(|&(d, w)| {
                let r = self.boundary_radius(d);
                w * 2.0 * r * r / (1.0 - r * r)
            })
            .sum();
        8.0 * sector
    }

    /// Points spread along the boundary, together with the generator index
    /// of the side they lie on.
    pub fn boundary_samples(&self, per_side: usize) -> Vec<(C, usize)> {
        let mut out = Vec::new();
        for k in 0..8 {
            for i in 0..per_side {
                let d = -PI / 8.0 + PI / 4.0 * (i as f64 + 0.5) / per_side as f64;
                let r = self.boundary_radius(d);
                out.push((C::from_polar(r, k as f64 * PI / 4.0 + d), k));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_pair_up_with_inverses() {
        let g = FuchsianGroup::bolza();
        for k in 0..8u8 {
            let prod = g.generator(k).compose(g.generator(FuchsianGroup::inverse_letter(k)));
            assert!(prod.distance_to(&Mobius::identity()) < 1e-13);
            assert!((g.generator(k).det() - 1.0).norm() < 1e-13);
        }
    }

    #[test]
    fn relator_is_identity_and_proper_subwords_are_not() {
        let g = FuchsianGroup::bolza();
        let r = FuchsianGroup::relator();
        assert!(g.element(&r).distance_to(&Mobius::identity()) < 1e-11);
        for len in 1..8 {
            let m = g.element(&r[..len]);
            assert!(m.distance_to(&Mobius::identity()) > 1e-3);
        }
    }

    #[test]
    fn octagon_geometry() {
        let g = FuchsianGroup::bolza();
        // cosh of the hyperbolic inradius is 1 + sqrt 2
        let r = g.inradius();
        let d = disk_distance(C::new(0.0, 0.0), C::new(r, 0.0));
        assert!((d.cosh() - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((g.vertex_radius() - 2f64.powf(-0.25)).abs() < 1e-12);
        // genus 2: area 4π
        assert!((g.domain_area() - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn boundary_points_are_paired() {
        let g = FuchsianGroup::bolza();
        for (z, k) in g.boundary_samples(7) {
            assert!(g.contains(z, 1e-12));
            let w = g.generator(FuchsianGroup::inverse_letter(k as u8)).apply(z);
            assert!(g.contains(w, 1e-10), "side {k}: {z} -> {w}");
            assert!((disk_distance(w, C::new(0.0, 0.0)) - disk_distance(z, C::new(0.0, 0.0))).abs() < 1e-10);
        }
    }

    #[test]
    fn reduction_lands_in_domain_and_tracks_word() {
        let g = FuchsianGroup::bolza();
        for &(x, y) in &[(0.93, 0.1), (-0.5, 0.84), (0.2, -0.97), (0.1, 0.1)] {
            let z = C::new(x, y);
            let (w, m, word) = g.reduce(z).unwrap();
            assert!(g.contains(w, 1e-12));
            assert!((m.apply(z) - w).norm() < 1e-9);
            let from_word = word.iter().rev().fold(Mobius::identity(), |acc, &k| acc.compose(g.generator(k)));
            assert!(from_word.distance_to(&m) < 1e-8 * (1.0 + m.a.norm()));
        }
        assert!(matches!(g.reduce(C::new(1.0, 0.0)), Err(Error::Domain(..))));
    }

    #[test]
    fn tangent_action_jacobian() {
        let g = FuchsianGroup::bolza();
        let m = g.generator(3).compose(g.generator(0));
        let (x, y, t) = (0.1, -0.2, 0.7);
        let j = m.act_jacobian(x, y);
        let h = 1e-6;
        for (col, (dx, dy)) in [(h, 0.0), (0.0, h)].iter().enumerate() {
            let p = m.act(x + dx, y + dy, t);
            let q = m.act(x - dx, y - dy, t);
            for row in 0..3 {
                let fd = (match row { 0 => p.0 - q.0, 1 => p.1 - q.1, _ => p.2 - q.2 }) / (2.0 * h);
                assert!((fd - j[row][col]).abs() < 1e-6, "row {row} col {col}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn generators_are_isometries(r1 in 0.0f64..0.8, a1 in -3.2f64..3.2, r2 in 0.0f64..0.8, a2 in -3.2f64..3.2, k in 0u8..8) {
            let g = FuchsianGroup::bolza();
            let (p, q) = (C::from_polar(r1, a1), C::from_polar(r2, a2));
            let m = g.generator(k);
            let d = disk_distance(p, q);
            proptest::prop_assert!((disk_distance(m.apply(p), m.apply(q)) - d).abs() < 1e-10 * (1.0 + d));
        }

        #[test]
        fn reduction_is_idempotent_on_random_points(r in 0.0f64..0.97, a in -3.2f64..3.2) {
            let g = FuchsianGroup::bolza();
            let z = C::from_polar(r, a);
            let (w, m, _) = g.reduce(z).unwrap();
            proptest::prop_assert!(g.contains(w, 1e-12));
            proptest::prop_assert!((m.apply(z) - w).norm() < 1e-9);
            // reducing twice changes nothing
            let (w2, _, word) = g.reduce(w).unwrap();
            proptest::prop_assert!(word.is_empty() && w2 == w);
        }
    }
}
