//! The magnetic ray transform `I(f)(γ) = ∫₀ᵀ f(γ(t), γ̇(t)) dt` over closed
//! orbits.
//!
//! Each closed orbit is integrated once and its dense output kept. The
//! integral is a sum over the integrator's steps of a five-point
//! Gauss–Legendre rule; the difference to the four-point rule serves as the
//! error estimate, and steps whose estimate misses the target are bisected.

use crate::dynamics::{ClosedOrbit, FlowField, Tolerances, Trajectory};
use crate::error::{Error, Result};
use crate::fiber::{AnalyticFiberFunction, FiberFunction, PointEvaluator};
use crate::geometry::{wrap_angle, PhasePoint};
use crate::quadrature::gauss_legendre;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Something that can be evaluated at a point of the unit tangent bundle.
pub trait PhaseFunction: Sync {
    fn value_at(&self, p: PhasePoint) -> C;
}

impl PhaseFunction for PointEvaluator {
    fn value_at(&self, p: PhasePoint) -> C {
        self.eval(p.x, p.y, p.theta)
    }
}

impl PhaseFunction for AnalyticFiberFunction {
    fn value_at(&self, p: PhasePoint) -> C {
        self.eval(p.x, p.y, p.theta)
    }
}

impl<F: Fn(PhasePoint) -> C + Sync> PhaseFunction for F {
    fn value_at(&self, p: PhasePoint) -> C {
        self(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayOptions {
    /// Integrator tolerance for the stored orbit.
    pub rtol: f64,
    pub atol: f64,
    /// Target quadrature error per unit time.
    pub panel_tol: f64,
    /// Bisection depth for panels that miss the target.
    pub max_depth: usize,
    /// Largest closure defect accepted for an orbit of this flow.
    pub closure_tol: f64,
}

impl Default for RayOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, panel_tol: 1e-11, max_depth: 8, closure_tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayValue {
    pub value: C,
    /// Sum of the per-panel error estimates.
    pub error_estimate: f64,
}

/// A closed orbit with its stored dense trajectory.
#[derive(Clone, Debug)]
pub struct OrbitPath {
    pub label: String,
    pub period: f64,
    trajectory: Trajectory,
}

struct Rules {
    g5: Vec<(f64, f64)>,
    g4: Vec<(f64, f64)>,
}

impl Rules {
    fn new() -> Self {
        let pair = |n| {
            let (x, w) = gauss_legendre(n);
            x.into_iter().zip(w).collect()
        };
        Self { g5: pair(5), g4: pair(4) }
    }
}

impl OrbitPath {
    /// Integrate once around `orbit` under `field`, rejecting orbits that do
    /// not close under this flow (a different surface or intensity).
    pub fn new(field: &FlowField, orbit: &ClosedOrbit, opts: &RayOptions) -> Result<Self> {
        let tol = Tolerances::new(opts.rtol, opts.atol);
        let trajectory = orbit.trajectory(field, &tol)?;
        let g = trajectory.final_deck().inverse().then(&orbit.holonomy.inverse());
        let back = g.act(trajectory.end);
        let s = orbit.start;
        let gap = [back.x - s.x, back.y - s.y, wrap_angle(back.theta - s.theta)];
        let gap = (gap[0] * gap[0] + gap[1] * gap[1] + gap[2] * gap[2]).sqrt();
        if !(gap < opts.closure_tol) {
            return Err(Error::Precondition(format!(
                "orbit {} does not close under this flow (defect {gap:.2e}); surface or intensity mismatch",
                orbit.label
            )));
        }
        Ok(Self { label: orbit.label.clone(), period: orbit.period, trajectory })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    /// `∫₀ᵀ f dt` along the stored orbit.
    pub fn integrate<F: PhaseFunction + ?Sized>(&self, f: &F, opts: &RayOptions) -> RayValue {
        let rules = Rules::new();
        let mut value = C::new(0.0, 0.0);
        let mut err = 0.0;
        for seg in &self.trajectory.segments {
            let point = |t: f64| seg.point(t);
            let (v, e) = panel(f, &point, seg.t0(), seg.t1(), &rules, opts, 0);
            value += v;
            err += e;
        }
        RayValue { value, error_estimate: err }
    }
}

fn panel<F: PhaseFunction + ?Sized>(
    f: &F,
    point: &dyn Fn(f64) -> PhasePoint,
    a: f64,
    b: f64,
    rules: &Rules,
    opts: &RayOptions,
    depth: usize,
) -> (C, f64) {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let rule = |r: &[(f64, f64)]| r.iter().map(|&(x, w)| f.value_at(point(mid + half * x)) * (w * half)).sum::<C>();
    let fine = rule(&rules.g5);
    let est = (fine - rule(&rules.g4)).norm();
    if est <= opts.panel_tol * (b - a).abs() || depth >= opts.max_depth {
        return (fine, est);
    }
    let (l, el) = panel(f, point, a, mid, rules, opts, depth + 1);
    let (r, er) = panel(f, point, mid, b, rules, opts, depth + 1);
    (l + r, el + er)
}

/// `I(f)(γ)` for a grid-stored fiber function, checking that `f` lives on
/// the surface of `field`.
pub fn ray_transform(f: &FiberFunction, orbit: &ClosedOrbit, field: &FlowField, opts: &RayOptions) -> Result<RayValue> {
    check_surface(f, field)?;
    let path = OrbitPath::new(field, orbit, opts)?;
    Ok(path.integrate(&f.evaluator(), opts))
}

fn check_surface(f: &FiberFunction, field: &FlowField) -> Result<()> {
    if !f.grid().surface().same_system(field.surface()) {
        return Err(Error::Precondition("function and orbits belong to different magnetic systems".into()));
    }
    Ok(())
}

/// Closed orbits prepared for repeated ray transforms.
pub fn prepare_paths(field: &FlowField, orbits: &[ClosedOrbit], opts: &RayOptions) -> Result<Vec<OrbitPath>> {
    orbits.par_iter().map(|o| OrbitPath::new(field, o, opts)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayTransformEntry {
    pub orbit_label: String,
    pub period: f64,
    pub value: f64,
    #[serde(skip)]
    pub error_estimate: f64,
}

/// `I(f)` over an orbit table, keyed by orbit label.
#[derive(Clone, Debug, PartialEq)]
pub struct RayTransformTable {
    pub entries: Vec<RayTransformEntry>,
    /// Provenance of the integrand.
    pub descriptor: String,
}

impl RayTransformTable {
    /// Fill the table for a real-valued `f`.
    pub fn compute(f: &FiberFunction, field: &FlowField, paths: &[OrbitPath], descriptor: &str, opts: &RayOptions) -> Result<Self> {
        check_surface(f, field)?;
        if f.reality_residual() > 1e-10 {
            return Err(Error::Precondition("ray transform tables hold real integrands".into()));
        }
        let ev = f.evaluator();
        Ok(Self::from_function(&ev, paths, descriptor, opts))
    }

    pub fn from_function<F: PhaseFunction + ?Sized>(f: &F, paths: &[OrbitPath], descriptor: &str, opts: &RayOptions) -> Self {
        let entries = paths
            .par_iter()
            .map(|p| {
                let r = p.integrate(f, opts);
                RayTransformEntry { orbit_label: p.label.clone(), period: p.period, value: r.value.re, error_estimate: r.error_estimate }
            })
            .collect();
        Self { entries, descriptor: descriptor.to_string() }
    }

    /// `max |I(f)(γ)| / T(γ)`.
    pub fn max_relative(&self) -> f64 {
        self.entries.iter().map(|e| e.value.abs() / e.period).fold(0.0, f64::max)
    }

    /// `max error_estimate / T`.
    pub fn max_relative_error_estimate(&self) -> f64 {
        self.entries.iter().map(|e| e.error_estimate / e.period).fold(0.0, f64::max)
    }

    pub fn get(&self, label: &str) -> Option<&RayTransformEntry> {
        self.entries.iter().find(|e| e.orbit_label == label)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for e in &self.entries {
            wtr.serialize(e)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, descriptor: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<RayTransformEntry>, _>>()?;
        if entries.iter().any(|e| !e.value.is_finite() || !e.period.is_finite()) {
            return Err(Error::Precondition("non-finite ray transform value".into()));
        }
        Ok(Self { entries, descriptor: descriptor.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{enumerate_closed_geodesics, flat_torus_orbits, OrbitOptions};
    use crate::fiber::PhaseGrid;
    use crate::geometry::MagneticSurface;
    use crate::tomography::make_potential;
    use crate::fiber::{random_fiber_function, RandomFiberSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn bolza_setup(lambda: f64) -> (Arc<PhaseGrid>, FlowField, Vec<ClosedOrbit>) {
        let s = Arc::new(MagneticSurface::bolza(lambda));
        let grid = PhaseGrid::new(s.clone(), 96, 4).unwrap();
        let table = enumerate_closed_geodesics(&s, 2, &OrbitOptions::default()).unwrap();
        (grid, FlowField::new(s), table.orbits)
    }

    #[test]
    fn constant_integrates_to_period() {
        let (grid, field, orbits) = bolza_setup(0.0);
        let one = FiberFunction::constant(&grid, C::new(1.0, 0.0));
        for o in orbits.iter().take(5) {
            let r = ray_transform(&one, o, &field, &RayOptions::default()).unwrap();
            assert!((r.value.re - o.period).abs() < 1e-12 * o.period, "{} {}", r.value, o.period);
            assert_eq!(r.value.im, 0.0);
        }
    }

    #[test]
    fn potentials_integrate_to_zero_and_quadrature_matches_refined_rule() {
        let (grid, field, orbits) = bolza_setup(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = RandomFiberSpec { max_degree: 1, real: true, ..Default::default() };
        let a = random_fiber_function(grid.model(), &spec, &mut rng).sample(&grid).unwrap();
        let f = make_potential(&a).unwrap();
        let opts = RayOptions::default();
        let paths = prepare_paths(&field, &orbits, &opts).unwrap();
        let table = RayTransformTable::compute(&f, &field, &paths, "potential", &opts).unwrap();
        assert!(table.max_relative() < 1e-7, "{}", table.max_relative());
        assert!(table.max_relative_error_estimate() < 1e-8);
        // a generic integrand against a refined rule on a tighter trajectory
        let g = random_fiber_function(grid.model(), &RandomFiberSpec { real: true, ..Default::default() }, &mut rng);
        let fine_opts = RayOptions { rtol: 1e-13, atol: 1e-13, panel_tol: 1e-14, ..opts };
        for o in orbits.iter().take(4) {
            let coarse = OrbitPath::new(&field, o, &opts).unwrap().integrate(&g, &opts);
            let fine = OrbitPath::new(&field, o, &fine_opts).unwrap();
            let reference: C = fine
                .trajectory()
                .segments
                .iter()
                .map(|s| {
                    crate::quadrature::gauss_legendre_on(8, s.t0(), s.t1())
                        .into_iter()
                        .map(|(t, w)| g.eval(s.point(t).x, s.point(t).y, s.point(t).theta) * w)
                        .sum::<C>()
                })
                .sum();
            assert!((coarse.value - reference).norm() < 1e-8 * o.period, "{}: {} vs {}", o.label, coarse.value, reference);
            assert!(coarse.error_estimate < 1e-8 * o.period);
        }
    }

    #[test]
    fn wrong_surface_is_rejected() {
        let (grid, field, orbits) = bolza_setup(0.0);
        let other = FlowField::new(Arc::new(MagneticSurface::bolza(0.3)));
        let one = FiberFunction::constant(&grid, C::new(1.0, 0.0));
        assert!(ray_transform(&one, &orbits[0], &other, &RayOptions::default()).is_err());
        let _ = field;
    }

    #[test]
    fn torus_lines_see_the_mean_of_dx() {
        let s = Arc::new(MagneticSurface::flat_torus(0.0));
        let grid = PhaseGrid::new(s.clone(), 16, 4).unwrap();
        let field = FlowField::new(s.clone());
        let orbits = flat_torus_orbits(&s, 2, &OrbitOptions::default()).unwrap();
        // dx lifts to cos θ; along the (p, q) line ∫ cos θ dt = p
        let dx = crate::tomography::SymmetricTensor::new(1, vec![crate::geometry::BaseFunction::constant(1.0), crate::geometry::BaseFunction::zero()]).unwrap();
        let f = dx.lift(&grid).unwrap();
        for o in &orbits {
            let r = ray_transform(&f, o, &field, &RayOptions::default()).unwrap();
            let (p, _) = parse_pq(&o.label);
            assert!((r.value.re - p).abs() < 1e-9, "{}: {}", o.label, r.value);
        }
    }

    fn parse_pq(label: &str) -> (f64, f64) {
        let t = label.trim_matches(|c| c == '(' || c == ')');
        let mut it = t.split(',').map(|s| s.trim().parse::<f64>().unwrap());
        (it.next().unwrap(), it.next().unwrap())
    }

    #[test]
    fn csv_round_trip() {
        let t = RayTransformTable {
            entries: vec![RayTransformEntry { orbit_label: "ab".into(), period: 3.5, value: -0.25, error_estimate: 0.0 }],
            descriptor: "test".into(),
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("orbit_label,period,value\n"));
        assert_eq!(RayTransformTable::read_csv(&buf[..], "test").unwrap(), t);
    }
}
