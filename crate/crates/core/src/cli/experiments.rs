//! One runner per acceptance criterion. Each returns a typed summary for
//! programmatic use together with an [`Outcome`] holding the report and the
//! tables the command line writes out.

use super::config::ExperimentConfig;
use crate::dynamics::{
    continue_table, enumerate_closed_geodesics, hyperbolicity_report, riccati_solve, ClosedOrbit, FlowField, HyperbolicityOptions, LyapunovOptions,
    RiccatiOptions,
};
use crate::entropy::{
    entropy_production_curve, second_derivative_check, variance, CorrelationOptions, DivergenceDensity, EntropyOptions, EntropyPoint,
    SecondDerivativeOptions, SecondDerivativeSummary,
};
use crate::error::{Error, Result};
use crate::fiber::{frame_residuals, random_fiber_function, FiberFunction, PhaseGrid, RandomFiberSpec};
use crate::geometry::{MagneticSurface, PhasePoint, SurfaceModel};
use crate::pestov::{alpha_estimate, gap_inequality_check, pestov_check};
use crate::report::{Check, ExperimentReport};
use crate::tomography::{bump_tensor, make_potential, prepare_paths, truncated_transport_solve, RayOptions, RayTransformTable, SymmetricTensor};
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// A CSV file produced by an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub contents: Vec<u8>,
}

impl CsvTable {
    fn build<R: Serialize>(name: &str, rows: &[R]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let contents = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(Self { name: name.to_string(), contents })
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    /// Acceptance criterion this run decides, e.g. `"C4"`.
    pub criterion: String,
    pub report: ExperimentReport,
    pub summary: serde_json::Value,
    pub tables: Vec<CsvTable>,
}

impl Outcome {
    fn new<S: Serialize>(criterion: &str, report: ExperimentReport, summary: &S, tables: Vec<CsvTable>) -> Self {
        let summary = serde_json::to_value(summary).unwrap_or(serde_json::Value::Null);
        Self { criterion: criterion.to_string(), report, summary, tables }
    }

    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// Independent stream for sample `index` of experiment `tag`.
fn rng_for(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(index);
    rng
}

fn label(s: &MagneticSurface) -> String {
    match s.model() {
        SurfaceModel::FlatTorusConformal => "torus".to_string(),
        SurfaceModel::BolzaOctagon => format!("bolza(lambda={})", s.lambda_const()),
    }
}

fn spectral_grid(cfg: &ExperimentConfig, s: MagneticSurface) -> Result<Arc<PhaseGrid>> {
    let n = match s.model() {
        SurfaceModel::FlatTorusConformal => cfg.surface.torus_grid,
        SurfaceModel::BolzaOctagon => cfg.surface.bolza_grid,
    };
    PhaseGrid::new(Arc::new(s), n, cfg.surface.band_limit)
}

fn sample(grid: &Arc<PhaseGrid>, spec: &RandomFiberSpec, rng: &mut ChaCha8Rng) -> Result<FiberFunction> {
    random_fiber_function(grid.model(), spec, rng).sample(grid)
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

// ---------------------------------------------------------------- C1

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResidual {
    pub surface: String,
    pub samples: usize,
    pub max_residual: f64,
    pub max_leakage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub surfaces: Vec<SurfaceResidual>,
    pub max_residual: f64,
}

#[derive(Serialize)]
struct FrameRow {
    surface: String,
    sample: usize,
    commutator_x_v: f64,
    commutator_v_xperp: f64,
    commutator_x_xperp: f64,
}

/// Commutator identities of the frame on random band-limited functions.
pub fn frame_identities(cfg: &ExperimentConfig) -> Result<(FrameSummary, Outcome)> {
    let fc = &cfg.frame;
    let spec = RandomFiberSpec { max_degree: fc.max_degree, ..Default::default() };
    let mut rows = Vec::new();
    let mut surfaces = Vec::new();
    let mut rep = ExperimentReport::new("frame_identities");
    for (si, s) in cfg.surface.all()?.into_iter().enumerate() {
        let name = label(&s);
        let grid = spectral_grid(cfg, s)?;
        let res: Vec<[f64; 3]> = (0..fc.samples)
            .into_par_iter()
            .map(|i| frame_residuals(&sample(&grid, &spec, &mut rng_for(cfg.seed, 100 + si as u64, i as u64))?))
            .collect::<Result<_>>()?;
        let worst = max_of(res.iter().flat_map(|r| r.iter().copied()));
        rep.check(Check::below(&format!("frame.{name}"), "largest commutator residual relative to the H¹ norm", worst, fc.tolerance));
        surfaces.push(SurfaceResidual { surface: name.clone(), samples: fc.samples, max_residual: worst, max_leakage: 0.0 });
        rows.extend(res.iter().enumerate().map(|(i, r)| FrameRow {
            surface: name.clone(),
            sample: i,
            commutator_x_v: r[0],
            commutator_v_xperp: r[1],
            commutator_x_xperp: r[2],
        }));
    }
    let summary = FrameSummary { max_residual: max_of(surfaces.iter().map(|s| s.max_residual)), surfaces };
    rep.metric("max_residual", summary.max_residual);
    let table = CsvTable::build("frame_identities.csv", &rows)?;
    Ok((summary.clone(), Outcome::new("C1", rep, &summary, vec![table])))
}

// ---------------------------------------------------------------- C2

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PestovSummary {
    pub surfaces: Vec<SurfaceResidual>,
    pub max_residual: f64,
}

#[derive(Serialize)]
struct PestovRow {
    surface: String,
    sample: usize,
    lhs: f64,
    rhs_generator_v: f64,
    rhs_curvature: f64,
    rhs_generator: f64,
    relative_residual: f64,
}

/// Pestov's identity on random functions over every configured surface.
pub fn pestov_identity(cfg: &ExperimentConfig) -> Result<(PestovSummary, Outcome)> {
    let pc = &cfg.pestov;
    let spec = RandomFiberSpec { max_degree: pc.max_degree, ..Default::default() };
    let mut rows = Vec::new();
    let mut surfaces = Vec::new();
    let mut rep = ExperimentReport::new("pestov_identity");
    for (si, s) in cfg.surface.all()?.into_iter().enumerate() {
        let name = label(&s);
        let grid = spectral_grid(cfg, s)?;
        let res: Vec<_> = (0..pc.samples)
            .into_par_iter()
            .map(|i| pestov_check(&sample(&grid, &spec, &mut rng_for(cfg.seed, 200 + si as u64, i as u64))?))
            .collect::<Result<_>>()?;
        let worst = max_of(res.iter().map(|r| r.relative_residual));
        let leak = max_of(res.iter().map(|r| r.leakage));
        rep.check(Check::below(&format!("pestov.{name}"), "largest relative residual of the identity", worst, pc.tolerance));
        rep.record_leakage(leak);
        surfaces.push(SurfaceResidual { surface: name.clone(), samples: pc.samples, max_residual: worst, max_leakage: leak });
        rows.extend(res.iter().enumerate().map(|(i, r)| PestovRow {
            surface: name.clone(),
            sample: i,
            lhs: r.lhs,
            rhs_generator_v: r.rhs_terms[0],
            rhs_curvature: r.rhs_terms[1],
            rhs_generator: r.rhs_terms[2],
            relative_residual: r.relative_residual,
        }));
    }
    let summary = PestovSummary { max_residual: max_of(surfaces.iter().map(|s| s.max_residual)), surfaces };
    rep.metric("max_residual", summary.max_residual);
    let table = CsvTable::build("pestov.csv", &rows)?;
    Ok((summary.clone(), Outcome::new("C2", rep, &summary, vec![table])))
}

// ---------------------------------------------------------------- C3

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeAnchor {
    pub surface: String,
    pub area: f64,
    /// `⟨1, 1⟩` by grid quadrature.
    pub unit_norm: f64,
    pub unit_norm_error: f64,
    /// `∫K dA − 2πχ`.
    pub gauss_bonnet_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSummary {
    pub bolza_area: f64,
    pub bolza_area_error: f64,
    pub surfaces: Vec<VolumeAnchor>,
}

/// Area and total-curvature anchors on every configured grid.
pub fn volume_anchors(cfg: &ExperimentConfig) -> Result<(AnchorSummary, Outcome)> {
    let tol = cfg.pestov.area_tolerance;
    let mut rep = ExperimentReport::new("volume_anchors");
    let bolza_area = crate::geometry::FuchsianGroup::bolza().domain_area();
    let bolza_area_error = (bolza_area - 4.0 * PI).abs();
    rep.check(Check::below("area.bolza", "|Area(octagon) − 4π|", bolza_area_error, tol));
    let mut surfaces = Vec::new();
    for s in cfg.surface.all()? {
        let name = label(&s);
        let chi = if s.model() == SurfaceModel::BolzaOctagon { -2.0 } else { 0.0 };
        let area = s.surface_area();
        let grid = spectral_grid(cfg, s)?;
        let one = FiberFunction::constant(&grid, C::new(1.0, 0.0));
        let unit_norm = one.inner_product(&one)?.re;
        let unit_norm_error = (unit_norm - 2.0 * PI * area).abs();
        let total_k = crate::fiber::curvature_function(&grid).mean_integral().re / (2.0 * PI);
        let gauss_bonnet_error = (total_k - 2.0 * PI * chi).abs();
        rep.check(Check::below(&format!("unit_norm.{name}"), "|⟨1,1⟩ − 2π·Area|", unit_norm_error, tol));
        rep.check(Check::below(&format!("gauss_bonnet.{name}"), "|∫K dA − 2πχ|", gauss_bonnet_error, tol));
        surfaces.push(VolumeAnchor { surface: name, area, unit_norm, unit_norm_error, gauss_bonnet_error });
    }
    let summary = AnchorSummary { bolza_area, bolza_area_error, surfaces };
    Ok((summary.clone(), Outcome::new("C3", rep, &summary, Vec::new())))
}

// ---------------------------------------------------------------- C4

/// Closed orbits at `λ = 0` and continued to the configured intensity.
#[derive(Clone, Debug)]
pub struct OrbitTables {
    pub base: Vec<ClosedOrbit>,
    pub continued: Vec<ClosedOrbit>,
    pub lambda: f64,
}

impl OrbitTables {
    /// Orbits of the Bolza surface at intensity `lambda`, continuing the base
    /// table when it is neither end of the stored pair.
    pub fn at(&self, lambda: f64, cfg: &ExperimentConfig) -> Result<Vec<ClosedOrbit>> {
        if lambda == 0.0 {
            return Ok(self.base.clone());
        }
        if lambda == self.lambda {
            return Ok(self.continued.clone());
        }
        let target = MagneticSurface::bolza(lambda);
        continue_table(&self.base, &target, 1.0, cfg.orbits.continuation_steps, &cfg.orbits.options()).into_iter().map(|(_, r)| r).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub classes_tried: usize,
    pub orbits: usize,
    pub duplicates: usize,
    pub skipped: Vec<(String, String)>,
    pub max_closure_error: f64,
    pub max_period_error: f64,
    pub continued_to: f64,
    pub continued: usize,
    pub continuation_failures: Vec<(String, String)>,
    pub max_continued_closure_error: f64,
}

#[derive(Serialize)]
struct OrbitRow<'a> {
    label: &'a str,
    lambda: f64,
    period: f64,
    closure_error: f64,
    x: f64,
    y: f64,
    theta: f64,
}

fn orbit_rows(orbits: &[ClosedOrbit], lambda: f64) -> Vec<OrbitRow<'_>> {
    orbits
        .iter()
        .map(|o| OrbitRow { label: &o.label, lambda, period: o.period, closure_error: o.closure_error, x: o.start.x, y: o.start.y, theta: o.start.theta })
        .collect()
}

/// Closed geodesics of the Bolza surface and their continuation in `λ`.
pub fn orbit_suite(cfg: &ExperimentConfig) -> Result<(OrbitSummary, OrbitTables, Outcome)> {
    let oc = &cfg.orbits;
    let opts = oc.options();
    let target = MagneticSurface::bolza(oc.continue_to);
    let table = enumerate_closed_geodesics(&target, oc.max_word_length, &opts)?;
    let mut continued = Vec::new();
    let mut failures = Vec::new();
    if oc.continue_to != 0.0 {
        for (label, res) in continue_table(&table.orbits, &target, 1.0, oc.continuation_steps, &opts) {
            match res {
                Ok(o) => continued.push(o),
                Err(e) => failures.push((label, e.to_string())),
            }
        }
    } else {
        continued = table.orbits.clone();
    }
    let summary = OrbitSummary {
        classes_tried: table.classes_tried,
        orbits: table.orbits.len(),
        duplicates: table.duplicates.len(),
        skipped: table.skipped.clone(),
        max_closure_error: max_of(table.orbits.iter().map(|o| o.closure_error)),
        max_period_error: table.max_period_error,
        continued_to: oc.continue_to,
        continued: continued.len(),
        continuation_failures: failures,
        max_continued_closure_error: max_of(continued.iter().map(|o| o.closure_error)),
    };
    let mut rep = ExperimentReport::new("orbits");
    rep.check(Check::at_most("orbits.skipped", "word classes without a closed orbit", summary.skipped.len() as f64, 0.0));
    rep.check(Check::below("orbits.closure", "largest closure error at λ = 0", summary.max_closure_error, oc.closure_tolerance));
    rep.check(Check::below("orbits.period", "largest |T − 2 arccosh(|tr|/2)|", summary.max_period_error, oc.period_tolerance));
    rep.check(Check::at_most("orbits.continuation_failures", "orbits lost in continuation", summary.continuation_failures.len() as f64, 0.0));
    rep.check(Check::below("orbits.continued_closure", "largest closure error after continuation", summary.max_continued_closure_error, oc.closure_tolerance));
    rep.metric("orbits", summary.orbits).metric("classes_tried", summary.classes_tried).metric("duplicates", summary.duplicates);
    let mut rows = orbit_rows(&table.orbits, 0.0);
    if oc.continue_to != 0.0 {
        rows.extend(orbit_rows(&continued, oc.continue_to));
    }
    let csv = CsvTable::build("orbits.csv", &rows)?;
    let tables = OrbitTables { base: table.orbits, continued, lambda: oc.continue_to };
    Ok((summary.clone(), tables, Outcome::new("C4", rep, &summary, vec![csv])))
}

// ---------------------------------------------------------------- C5

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSummary {
    /// Deviations from `r± = ±1` on the Bolza surface at `λ = 0`.
    pub geodesic_plus_error: f64,
    pub geodesic_minus_error: f64,
    pub geodesic_separation_error: f64,
    pub lambda: f64,
    pub separation: Option<f64>,
    pub max_residual: f64,
    pub blow_up: bool,
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub anosov_consistent: bool,
    pub flat_separation: f64,
}

#[derive(Serialize)]
struct RiccatiRow {
    start: usize,
    t: f64,
    x: f64,
    y: f64,
    theta: f64,
    r_plus: f64,
    r_minus: f64,
}

fn liouville_starts(surface: &MagneticSurface, n: usize, seed: u64, tag: u64) -> Vec<PhasePoint> {
    (0..n).map(|i| surface.sample_liouville(&mut rng_for(seed, tag, i as u64))).collect()
}

/// Riccati solutions and hyperbolicity on the Bolza surface, with the flat
/// torus as the non-hyperbolic control.
pub fn riccati_experiment(cfg: &ExperimentConfig) -> Result<(RiccatiSummary, Outcome)> {
    let rc = &cfg.riccati;
    let ropts = RiccatiOptions::default();
    let mut rep = ExperimentReport::new("riccati");

    let geodesic = FlowField::new(Arc::new(MagneticSurface::bolza(0.0)));
    let starts = liouville_starts(geodesic.surface(), rc.starts, cfg.seed, 500);
    let pairs: Vec<_> = starts.par_iter().map(|&z| riccati_solve(&geodesic, z, rc.length, &ropts)).collect::<Result<_>>()?;
    let plus = max_of(pairs.iter().flat_map(|p| p.r_plus.iter().map(|r| (r - 1.0).abs())));
    let minus = max_of(pairs.iter().flat_map(|p| p.r_minus.iter().map(|r| (r + 1.0).abs())));
    let sep = max_of(pairs.iter().map(|p| (p.separation - 2.0).abs()));
    rep.check(Check::below("riccati.geodesic_plus", "max |r⁺ − 1| at λ = 0", plus, rc.tolerance));
    rep.check(Check::below("riccati.geodesic_minus", "max |r⁻ + 1| at λ = 0", minus, rc.tolerance));
    rep.check(Check::below("riccati.geodesic_separation", "|separation − 2| at λ = 0", sep, rc.tolerance));

    let field = FlowField::new(Arc::new(MagneticSurface::bolza(rc.lambda)));
    let starts = liouville_starts(field.surface(), rc.starts, cfg.seed, 501);
    let hopts = HyperbolicityOptions { riccati_length: rc.length, lyapunov_time: rc.lyapunov_time, ..Default::default() };
    let (hrep, h) = hyperbolicity_report(&field, &starts, &hopts)?;
    rep.check(Check::flag("riccati.no_blow_up", "Riccati solutions stay bounded", !h.riccati_blow_up));
    rep.check(Check::above("riccati.separation", "min (r⁺ − r⁻) at the configured λ", h.separation.unwrap_or(0.0), 0.0));
    rep.merge(hrep);
    let pair = riccati_solve(&field, starts[0], rc.length, &ropts)?;
    let rows: Vec<RiccatiRow> = pair
        .times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let p = pair.points[j];
            RiccatiRow { start: 0, t, x: p.x, y: p.y, theta: p.theta, r_plus: pair.r_plus[j], r_minus: pair.r_minus[j] }
        })
        .collect();

    let flat = FlowField::new(Arc::new(MagneticSurface::flat_torus(0.0)));
    let starts = liouville_starts(flat.surface(), rc.starts, cfg.seed, 502);
    let flat_sep = starts
        .iter()
        .map(|&z| riccati_solve(&flat, z, rc.length, &ropts).map(|p| p.separation))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    rep.check(Check::below("riccati.flat_separation", "separation on the flat torus", flat_sep, rc.flat_separation));

    let summary = RiccatiSummary {
        geodesic_plus_error: plus,
        geodesic_minus_error: minus,
        geodesic_separation_error: sep,
        lambda: rc.lambda,
        separation: h.separation,
        max_residual: h.max_riccati_residual,
        blow_up: h.riccati_blow_up,
        exponent: h.exponent,
        exponent_stderr: h.stderr,
        anosov_consistent: h.anosov_consistent,
        flat_separation: flat_sep,
    };
    let table = CsvTable::build("riccati.csv", &rows)?;
    Ok((summary.clone(), Outcome::new("C5", rep, &summary, vec![table])))
}

// ---------------------------------------------------------------- C6

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub surface: String,
    pub alpha: f64,
    pub argmin: usize,
    pub samples: usize,
    pub violated: bool,
    /// Smallest slack of the gap inequality at the estimated α, when run.
    pub min_gap_slack: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub surfaces: Vec<AlphaRow>,
    pub control: AlphaRow,
}

/// α-control estimates with a flat torus as the negative control. Each
/// Bolza estimate is then fed to the gap inequality.
pub fn alpha_control(cfg: &ExperimentConfig) -> Result<(AlphaSummary, Outcome)> {
    let ac = &cfg.alpha;
    let spec = RandomFiberSpec { max_degree: ac.max_degree, ..Default::default() };
    let gap_spec = RandomFiberSpec { min_degree: ac.gap_degree as usize, max_degree: ac.gap_max_degree, ..Default::default() };
    let mut rep = ExperimentReport::new("alpha_control");
    let mut surfaces = Vec::new();
    for (si, &l) in cfg.surface.bolza_lambdas.iter().enumerate() {
        let s = MagneticSurface::bolza(l);
        let name = label(&s);
        let grid = spectral_grid(cfg, s)?;
        let est = alpha_estimate(&grid, ac.samples, &spec, cfg.seed.wrapping_add(600_000 * (si as u64 + 1)))?;
        rep.check(Check::above(&format!("alpha.{name}"), "estimated α", est.alpha, 0.0));
        let slacks: Vec<f64> = (0..ac.gap_samples)
            .into_par_iter()
            .map(|i| {
                let u = sample(&grid, &gap_spec, &mut rng_for(cfg.seed, 610 + si as u64, i as u64))?;
                Ok(gap_inequality_check(&u, ac.gap_degree, est.alpha)?.slack)
            })
            .collect::<Result<_>>()?;
        let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
        rep.check(Check::at_least(&format!("gap.{name}"), "smallest gap-inequality slack at the estimated α", min_slack, -ac.slack_tolerance));
        surfaces.push(AlphaRow { surface: name, alpha: est.alpha, argmin: est.argmin, samples: est.sample_count, violated: est.violated, min_gap_slack: Some(min_slack) });
    }
    let flat = MagneticSurface::flat_torus(ac.control_lambda);
    let grid = PhaseGrid::new(Arc::new(flat), ac.control_grid, cfg.surface.band_limit)?;
    let est = alpha_estimate(&grid, ac.samples, &spec, cfg.seed.wrapping_add(690_000))?;
    rep.check(Check::below("alpha.control", "estimated α on the flat torus with constant intensity", est.alpha, 0.0));
    let control = AlphaRow {
        surface: format!("flat_torus(lambda={})", ac.control_lambda),
        alpha: est.alpha,
        argmin: est.argmin,
        samples: est.sample_count,
        violated: est.violated,
        min_gap_slack: None,
    };
    let mut rows = surfaces.clone();
    rows.push(control.clone());
    let table = CsvTable::build("alpha.csv", &rows)?;
    let summary = AlphaSummary { surfaces, control };
    Ok((summary.clone(), Outcome::new("C6", rep, &summary, vec![table])))
}

// ---------------------------------------------------------------- C7

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayFieldRow {
    pub lambda: f64,
    pub field: usize,
    pub max_relative: f64,
    pub max_error_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySummary {
    pub orbits: Vec<(f64, usize)>,
    pub fields: Vec<RayFieldRow>,
    /// `max |I(f)/T|` over fields and orbits, per λ.
    pub max_relative: Vec<(f64, f64)>,
    /// `max |I(1) − T| / T`, per λ.
    pub witness_error: Vec<(f64, f64)>,
}

/// Ray transforms of potentials over the orbit table, with the constant
/// function as a non-potential witness.
pub fn ray_experiment(cfg: &ExperimentConfig, orbits: &OrbitTables) -> Result<(RaySummary, Outcome)> {
    let rc = &cfg.ray;
    let opts = RayOptions { rtol: rc.rtol, atol: rc.rtol, panel_tol: rc.panel_tolerance, ..Default::default() };
    let spec = RandomFiberSpec { max_degree: 1, real: true, ..Default::default() };
    let mut rep = ExperimentReport::new("ray_transform");
    let mut summary = RaySummary { orbits: Vec::new(), fields: Vec::new(), max_relative: Vec::new(), witness_error: Vec::new() };
    let mut tables = Vec::new();
    for (li, &l) in rc.lambdas.iter().enumerate() {
        let surface = Arc::new(MagneticSurface::bolza(l));
        let field = FlowField::new(surface.clone());
        let paths = prepare_paths(&field, &orbits.at(l, cfg)?, &opts)?;
        let grid = PhaseGrid::new(surface, rc.grid, 4)?;
        let mut worst: f64 = 0.0;
        for i in 0..rc.fields {
            let a = sample(&grid, &spec, &mut rng_for(cfg.seed, 700 + li as u64, i as u64))?;
            let f = make_potential(&a)?;
            let table = RayTransformTable::compute(&f, &field, &paths, &format!("potential {i}"), &opts)?;
            worst = worst.max(table.max_relative());
            summary.fields.push(RayFieldRow { lambda: l, field: i, max_relative: table.max_relative(), max_error_estimate: table.max_relative_error_estimate() });
            if i == 0 {
                let mut buf = Vec::new();
                table.write_csv(&mut buf)?;
                tables.push(CsvTable { name: format!("ray_transform_lambda{l}.csv"), contents: buf });
            }
        }
        let one = |_: PhasePoint| C::new(1.0, 0.0);
        let witness = RayTransformTable::from_function(&one, &paths, "constant", &opts);
        let werr = max_of(witness.entries.iter().map(|e| (e.value - e.period).abs() / e.period));
        rep.check(Check::below(&format!("ray.potential.lambda{l}"), "max |I((X+λV)a)|/T over fields and orbits", worst, rc.tolerance));
        rep.check(Check::at_most(&format!("ray.witness.lambda{l}"), "max |I(1) − T|/T, rounding only", werr, 16.0 * f64::EPSILON));
        summary.orbits.push((l, paths.len()));
        summary.max_relative.push((l, worst));
        summary.witness_error.push((l, werr));
    }
    tables.push(CsvTable::build("ray_fields.csv", &summary.fields)?);
    Ok((summary.clone(), Outcome::new("C7", rep, &summary, tables)))
}

// ---------------------------------------------------------------- C8

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportRow {
    pub surface: String,
    pub case: usize,
    pub relative_error: f64,
    pub energy_fraction: f64,
    pub relative_residual: f64,
    pub kernel_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportSummary {
    pub cases: Vec<TransportRow>,
    pub max_error: f64,
    pub min_energy_fraction: f64,
}

/// Recover constructed potentials on the torus by the truncated transport
/// solve.
pub fn transport_recovery(cfg: &ExperimentConfig) -> Result<(TransportSummary, Outcome)> {
    let tc = &cfg.transport;
    let spec = RandomFiberSpec { max_degree: 1, real: true, base_band: tc.base_band, ..Default::default() };
    let band_limit = (tc.band + 3).max(4);
    let surfaces = [
        (MagneticSurface::flat_torus(tc.flat_lambda), tc.flat_grid, format!("flat_torus(lambda={})", tc.flat_lambda)),
        (cfg.surface.torus()?, tc.curved_grid, "torus".to_string()),
    ];
    let mut cases = Vec::new();
    for (si, (s, n, name)) in surfaces.into_iter().enumerate() {
        let grid = PhaseGrid::new(Arc::new(s), n, band_limit)?;
        let one = FiberFunction::constant(&grid, C::new(1.0, 0.0));
        let unit = one.inner_product(&one)?;
        let rows: Vec<TransportRow> = (0..tc.cases)
            .into_par_iter()
            .map(|i| {
                let a = sample(&grid, &spec, &mut rng_for(cfg.seed, 800 + si as u64, i as u64))?;
                let sol = truncated_transport_solve(&make_potential(&a)?, tc.band)?;
                let gauged = a.sub(&one.scale(a.inner_product(&one)? / unit));
                Ok(TransportRow {
                    surface: name.clone(),
                    case: i,
                    relative_error: sol.u.sub(&gauged).l2_norm() / a.l2_norm(),
                    energy_fraction: sol.energy_fraction_within(1),
                    relative_residual: sol.relative_residual,
                    kernel_dim: sol.kernel_dim,
                })
            })
            .collect::<Result<_>>()?;
        cases.extend(rows);
    }
    let max_error = max_of(cases.iter().map(|c| c.relative_error));
    let min_energy_fraction = cases.iter().map(|c| c.energy_fraction).fold(1.0, f64::min);
    let mut rep = ExperimentReport::new("transport_recovery");
    rep.check(Check::below("transport.error", "max ‖u − a‖/‖a‖ after gauge fixing", max_error, tc.tolerance));
    rep.check(Check::at_least("transport.energy", "min energy fraction in degrees |k| ≤ 1", min_energy_fraction, tc.energy_fraction));
    let table = CsvTable::build("transport.csv", &cases)?;
    let summary = TransportSummary { cases, max_error, min_energy_fraction };
    Ok((summary.clone(), Outcome::new("C8", rep, &summary, vec![table])))
}

// ---------------------------------------------------------------- C9

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub curve: Vec<EntropyPoint>,
    pub conformal_max_production: f64,
    pub derivatives: SecondDerivativeSummary,
    pub variance_decayed: bool,
    pub variance_tail_bound: f64,
    /// Liouville mean of `V(q̂)` and its standard error.
    pub liouville_mean: f64,
    pub liouville_mean_stderr: f64,
    pub coboundary_variance: f64,
    pub coboundary_stderr: f64,
    /// Hyperbolicity flag of the flow at each `s`.
    pub hyperbolic: Vec<(f64, bool)>,
}

#[derive(Serialize)]
struct CorrelationRow {
    t: f64,
    sigma: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct CurveRow {
    s: f64,
    e: f64,
    stderr: f64,
}

pub fn entropy_perturbation(cfg: &ExperimentConfig) -> SymmetricTensor {
    let e = &cfg.entropy;
    bump_tensor(e.q_amplitude, e.q_frequency, e.q_radius)
}

/// Entropy production of the thermostat perturbation and the variance
/// comparison at second order.
pub fn entropy_experiment(cfg: &ExperimentConfig) -> Result<(EntropySummary, Outcome)> {
    let ec = &cfg.entropy;
    let surface = Arc::new(MagneticSurface::bolza(ec.lambda));
    let field = FlowField::new(surface.clone());
    let q = entropy_perturbation(cfg);
    let mut rep = ExperimentReport::new("entropy");

    let eopts = EntropyOptions {
        s_values: ec.s_values.clone(),
        trajectories: ec.trajectories,
        length: ec.length,
        burn_in: ec.burn_in,
        seed: cfg.seed ^ 0x9e00,
        ..Default::default()
    };
    let curve = entropy_production_curve(&q, &surface, &eopts)?;
    if let Some(p) = curve.iter().find(|p| p.s == 0.0) {
        rep.check(Check::at_most("entropy.zero", "|e(0)|", p.production.abs(), 0.0));
    }
    // the production is identically zero however short the run
    let conformal = SymmetricTensor::conformal(2, 1.0, None)?;
    let short = EntropyOptions { length: 50.0, burn_in: 1.0, ..eopts.clone() };
    let conformal_max = max_of(entropy_production_curve(&conformal, &surface, &short)?.iter().map(|p| p.production.abs()));
    rep.check(Check::at_most("entropy.conformal", "max |e(s)| for a conformal perturbation", conformal_max, 0.0));

    let copts = CorrelationOptions { samples: ec.samples, t_max: ec.t_max, dt: ec.dt, origin_span: ec.t_max, seed: cfg.seed ^ 0x9e01, ..Default::default() };
    let vq = variance(&DivergenceDensity::new(&q, 1.0, surface.clone())?, &field, &copts)?;
    rep.check(Check::at_least("entropy.variance_nonnegative", "Var + 3·stderr", vq.value + 3.0 * vq.stderr, 0.0));
    rep.check(Check::at_most("entropy.liouville_mean", "|∫V(q̂)dμ| in standard errors", vq.correlation.mean.abs() / vq.correlation.mean_stderr, 3.0));
    let (drep, derivatives) = second_derivative_check(&curve, &vq, &SecondDerivativeOptions { rel_tol: ec.relative_tolerance, sigmas: 3.0 })?;
    rep.merge(drep);

    let grid = PhaseGrid::new(surface.clone(), cfg.surface.bolza_grid, 4)?;
    let spec = RandomFiberSpec { max_degree: 1, real: true, ..Default::default() };
    let u = sample(&grid, &spec, &mut rng_for(cfg.seed, 900, 0))?;
    let cob = make_potential(&u)?.evaluator();
    let copts_cob = CorrelationOptions { samples: ec.coboundary_samples, t_max: ec.coboundary_t_max, origin_span: ec.coboundary_t_max, seed: cfg.seed ^ 0x9e02, ..copts };
    let vc = variance(&cob, &field, &copts_cob)?;
    rep.check(Check::below("entropy.coboundary", "|Var((X+λV)u)| in standard errors", vc.value.abs() / vc.stderr, 3.0));

    let mut hyperbolic = Vec::new();
    let starts = liouville_starts(&surface, ec.hyperbolicity_starts, cfg.seed, 910);
    let hopts = HyperbolicityOptions { lyapunov_time: ec.hyperbolicity_time, lyapunov: LyapunovOptions::default(), ..Default::default() };
    let forcing = Arc::new(crate::tomography::TensorForcing::new(q.clone(), surface.clone())?);
    for &s in &ec.s_values {
        let f = if s == 0.0 { field.clone() } else { FlowField::new(surface.clone()).with_forcing(s, forcing.clone()) };
        let (_, h) = hyperbolicity_report(&f, &starts, &hopts)?;
        rep.check(Check::flag(&format!("entropy.hyperbolic.s{s}"), "perturbed flow passes the hyperbolicity report", h.anosov_consistent));
        hyperbolic.push((s, h.anosov_consistent));
    }

    let corr_rows: Vec<CorrelationRow> = vq
        .correlation
        .times
        .iter()
        .zip(&vq.correlation.values)
        .zip(&vq.correlation.stderr)
        .map(|((&t, &sigma), &stderr)| CorrelationRow { t, sigma, stderr })
        .collect();
    let curve_rows: Vec<CurveRow> = curve.iter().map(|p| CurveRow { s: p.s, e: p.production, stderr: p.stderr }).collect();
    let tables = vec![CsvTable::build("entropy.csv", &curve_rows)?, CsvTable::build("correlation.csv", &corr_rows)?];
    let summary = EntropySummary {
        curve,
        conformal_max_production: conformal_max,
        derivatives,
        variance_decayed: vq.decayed,
        variance_tail_bound: vq.tail_bound,
        liouville_mean: vq.correlation.mean,
        liouville_mean_stderr: vq.correlation.mean_stderr,
        coboundary_variance: vc.value,
        coboundary_stderr: vc.stderr,
        hyperbolic,
    };
    Ok((summary.clone(), Outcome::new("C9", rep, &summary, tables)))
}
