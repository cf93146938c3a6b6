//! Tensor lifts, the magnetic ray transform, potentials and the checks
//! around the kernel of the transform.

pub mod livsic;
pub mod ray;
pub mod tensor;
pub mod transport;

pub use livsic::{livsic_primitive_check, LivsicOptions, LivsicSummary};
pub use ray::{prepare_paths, ray_transform, OrbitPath, PhaseFunction, RayOptions, RayTransformEntry, RayTransformTable, RayValue};
pub use tensor::{bump_tensor, random_tensor, SymmetricTensor, TensorForcing};
pub use transport::{truncated_transport_solve, TransportSolution};

use crate::error::{Error, Result};
use crate::fiber::FiberFunction;

/// Relative mass outside the allowed degrees below which a function counts
/// as supported on them.
const DEGREE_TOL: f64 = 1e-12;

fn mass_outside(a: &FiberFunction, allowed: impl Fn(i32) -> bool) -> f64 {
    let prof = a.energy_profile();
    let total: f64 = prof.iter().map(|p| p.1).sum();
    let outside: f64 = prof.iter().filter(|(k, _)| !allowed(*k)).map(|p| p.1).sum();
    if total == 0.0 {
        0.0
    } else {
        (outside / total).sqrt()
    }
}

/// `(X + λV)a` for `a` of fiber degree at most one; such functions have
/// vanishing ray transform.
pub fn make_potential(a: &FiberFunction) -> Result<FiberFunction> {
    let leak = mass_outside(a, |k| k.abs() <= 1);
    if leak > DEGREE_TOL {
        return Err(Error::Precondition(format!("potential needs fiber degree ≤ 1, relative mass {leak:.2e} beyond")));
    }
    if a.band_limit() < 2 {
        return Err(Error::Precondition("band limit must be at least 2".into()));
    }
    let a = if a.kmax() > 1 { a.with_kmax(1)? } else { a.clone() };
    a.apply_generator()
}

/// `‖η₊a₋₁ + η₋a₁‖` for `a` with fiber degrees `±1`; zero exactly when the
/// associated 1-form is divergence free.
pub fn solenoidal_residual(a: &FiberFunction) -> Result<f64> {
    let leak = mass_outside(a, |k| k.abs() == 1);
    if leak > DEGREE_TOL {
        return Err(Error::Precondition(format!("solenoidal check needs degrees ±1, relative mass {leak:.2e} elsewhere")));
    }
    if a.kmax() == 0 {
        return Ok(0.0);
    }
    let lhs = a.component(-1).eta_plus()?.add(&a.component(1).eta_minus()?);
    Ok(lhs.l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{random_fiber_function, PhaseGrid, RandomFiberSpec};
    use crate::geometry::{MagneticSurface, RealTerm, BaseFunction};
    use num_complex::Complex64 as C;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn flat(n: usize) -> Arc<PhaseGrid> {
        PhaseGrid::new(Arc::new(MagneticSurface::flat_torus(0.4)), n, 4).unwrap()
    }

    #[test]
    fn constants_are_potentials_of_nothing() {
        let g = flat(16);
        let c = FiberFunction::constant(&g, C::new(2.5, 0.0));
        assert!(make_potential(&c).unwrap().l2_norm() < 1e-13);
    }

    #[test]
    fn degree_zero_potential_has_degrees_plus_minus_one() {
        let g = flat(32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = RandomFiberSpec { max_degree: 0, real: true, ..Default::default() };
        let u = random_fiber_function(g.model(), &spec, &mut rng).sample(&g).unwrap();
        let f = make_potential(&u).unwrap();
        for (k, e) in f.energy_profile() {
            if k.abs() != 1 {
                assert!(e < 1e-28, "degree {k} has mass {e}");
            }
        }
    }

    #[test]
    fn higher_degrees_are_rejected() {
        let g = flat(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_fiber_function(g.model(), &RandomFiberSpec { max_degree: 2, ..Default::default() }, &mut rng).sample(&g).unwrap();
        assert!(make_potential(&u).is_err());
    }

    #[test]
    fn gauge_shift_leaves_potential_unchanged() {
        let s = Arc::new(MagneticSurface::bolza(0.2));
        let g = PhaseGrid::new(s, 48, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = RandomFiberSpec { max_degree: 1, real: true, ..Default::default() };
        let a = random_fiber_function(g.model(), &spec, &mut rng).sample(&g).unwrap();
        let mut shifted = a.clone();
        shifted.set_offset(a.offset() + 3.0);
        let (f1, f2) = (make_potential(&a).unwrap(), make_potential(&shifted).unwrap());
        // the constant sits in the offset on the octagon and never reaches the derivatives
        for k in f1.degrees() {
            assert_eq!(f1.mode(k), f2.mode(k));
        }
        // on the torus it passes through the FFT and agrees to round-off
        let t = flat(24);
        let a = random_fiber_function(t.model(), &spec, &mut rng).sample(&t).unwrap();
        let mut shifted = a.clone();
        shifted.set_offset(C::new(3.0, 0.0));
        let d = make_potential(&a).unwrap().sub(&make_potential(&shifted).unwrap()).l2_norm();
        assert!(d < 1e-13 * make_potential(&a).unwrap().l2_norm(), "{d}");
    }

    #[test]
    fn harmonic_forms_are_solenoidal() {
        let g = flat(16);
        // σ = 0.7 dx − 0.2 dy lifts to constants in degrees ±1
        let a = FiberFunction::from_fn(&g, 1, |k, _, _| match k {
            1 => C::new(0.7, 0.2) * 0.5,
            -1 => C::new(0.7, -0.2) * 0.5,
            _ => C::new(0.0, 0.0),
        })
        .unwrap();
        assert!(solenoidal_residual(&a).unwrap() < 1e-12);
        assert_eq!(solenoidal_residual(&FiberFunction::zeros(&g, 1).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn exact_forms_match_spectral_laplacian() {
        // a_{±1} = η±u gives η₊η₋u + η₋η₊u = ½Δu on the flat torus; for
        // u = cos 2π(n·x) that has norm 2π²|n|²‖u‖
        let g = flat(32);
        let n = [2, -1];
        let u = BaseFunction::from_real_terms(&[RealTerm { n, cos: 1.0, sin: 0.0 }]);
        let uf = FiberFunction::from_fn(&g, 0, |_, x, y| u.value(x, y)).unwrap();
        let (p, m) = uf.ladder().unwrap();
        let a = p.add(&m);
        let res = solenoidal_residual(&a).unwrap();
        let nn = (n[0] * n[0] + n[1] * n[1]) as f64;
        let expect = 2.0 * PI * PI * nn * uf.l2_norm();
        assert!((res - expect).abs() < 1e-9 * expect, "{res} vs {expect}");
        assert!(solenoidal_residual(&uf).is_err());
    }
}
