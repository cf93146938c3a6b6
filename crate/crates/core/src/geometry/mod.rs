//! Surfaces, their deck groups and the magnetic intensity.

pub mod field;
pub mod fuchsian;
pub mod surface;

pub use field::{BaseFunction, RealTerm, TrigTerm, Window};
pub use fuchsian::{disk_distance, FuchsianGroup, Letter, Mobius};
pub use surface::{Deck, MagneticSurface, PhiJet, SurfaceModel};

use serde::{Deserialize, Serialize};

/// A point `(x, y, θ)` of the unit tangent bundle in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = a.rem_euclid(t);
    if r > std::f64::consts::PI {
        r - t
    } else {
        r
    }
}
