//! Closed orbits: seeds from conjugacy classes of the deck group, Newton
//! shooting and continuation in the magnetic intensity.
//!
//! A closed orbit through `z` with period `T` and holonomy `h` (the deck
//! transformation carrying the lift through `z` to the lift after one period)
//! satisfies `h⁻¹ · Φ̃_T(z) = z`. Shooting solves this together with a phase
//! condition pinning `z` to the hyperplane through a reference point that is
//! orthogonal to the flow.

use super::flow::{phase_distance, FlowField, Trajectory};
use super::ode::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Deck, FuchsianGroup, Letter, MagneticSurface, PhasePoint, SurfaceModel};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitOptions {
    pub tol: Tolerances,
    /// Newton stops once the closure residual falls below this.
    pub newton_tol: f64,
    /// Largest closure residual accepted as a closed orbit.
    pub accept_tol: f64,
    pub max_iterations: usize,
    /// Continuation step halvings allowed before giving up.
    pub max_bisections: usize,
    pub sample_count: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        // closure residuals of unstable orbits amplify the integration error
        // by roughly e^T; word length 4 reaches T ≈ 12
        Self {
            tol: Tolerances::new(1e-13, 1e-13),
            newton_tol: 1e-11,
            accept_tol: 1e-8,
            max_iterations: 20,
            max_bisections: 10,
            sample_count: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub t: f64,
    pub point: PhasePoint,
    /// Deck word accumulated since the start.
    pub deck_word: String,
}

#[derive(Clone, Debug)]
pub struct ClosedOrbit {
    /// Homology class `(p,q)` on the torus, conjugacy-class word on Bolza.
    pub label: String,
    pub lambda_scale: f64,
    pub start: PhasePoint,
    pub period: f64,
    pub closure_error: f64,
    /// Deck transformation `h` with `Φ̃_T(z̃) = h · z̃` for the lift through
    /// `start`.
    pub holonomy: Deck,
    pub samples: Vec<OrbitSample>,
}

/// One line of the orbit database.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitRecord {
    pub label: String,
    pub lambda_scale: f64,
    pub period: f64,
    pub start: PhasePoint,
    pub closure_error: f64,
}

impl ClosedOrbit {
    pub fn record(&self) -> OrbitRecord {
        OrbitRecord {
            label: self.label.clone(),
            lambda_scale: self.lambda_scale,
            period: self.period,
            start: self.start,
            closure_error: self.closure_error,
        }
    }

    /// Rebuild an orbit from its record by flowing once around it; the
    /// holonomy is read off the deck transformations met on the way.
    pub fn from_record(rec: &OrbitRecord, field: &FlowField, opts: &OrbitOptions) -> Result<Self> {
        let (e, acc) = field.flow(rec.start, rec.period, &opts.tol)?;
        let surface = field.surface();
        let mut candidates = vec![Deck::identity(surface.model())];
        if let Some(g) = surface.group() {
            for k in 0..g.generator_count() as Letter {
                candidates.push(Deck::Fuchsian { map: *g.generator(k), word: vec![k] });
            }
        }
        let mut best: Option<(f64, Deck)> = None;
        for c in candidates {
            let d = phase_distance(c.act(e), rec.start);
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, c));
            }
        }
        let (_, fix) = best.unwrap();
        // e = D Φ̃(z) and fix·e = z give Φ̃(z) = (fix ∘ D)⁻¹ z
        let holonomy = acc.then(&fix).inverse();
        let mut orbit = ClosedOrbit {
            label: rec.label.clone(),
            lambda_scale: rec.lambda_scale,
            start: rec.start,
            period: rec.period,
            closure_error: 0.0,
            holonomy,
            samples: Vec::new(),
        };
        orbit.closure_error = closure_residual(field, orbit.start, orbit.period, &orbit.holonomy, &opts.tol)?;
        orbit.samples = orbit_samples(field, orbit.start, orbit.period, opts)?;
        Ok(orbit)
    }

    /// Dense trajectory once around the orbit.
    pub fn trajectory(&self, field: &FlowField, tol: &Tolerances) -> Result<Trajectory> {
        field.trajectory(self.start, self.period, tol)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, orbits: &[ClosedOrbit]) -> Result<()> {
    for o in orbits {
        serde_json::to_writer(&mut w, &o.record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<OrbitRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

fn orbit_samples(field: &FlowField, z: PhasePoint, t: f64, opts: &OrbitOptions) -> Result<Vec<OrbitSample>> {
    if opts.sample_count == 0 {
        return Ok(Vec::new());
    }
    let tr = field.trajectory(z, t, &opts.tol)?;
    Ok(tr.samples(opts.sample_count).into_iter().map(|(t, point, deck_word)| OrbitSample { t, point, deck_word }).collect())
}

/// Flow for `t` and map the endpoint back by the inverse holonomy. Returns
/// `h⁻¹Φ̃_t(z)`, its derivative in `z` and its derivative in `t`.
fn shoot(field: &FlowField, z: PhasePoint, t: f64, holonomy: &Deck, tol: &Tolerances) -> Result<(PhasePoint, [[f64; 3]; 3], [f64; 3])> {
    let (e, acc, m) = field.flow_with_tangent(z, t, tol)?;
    let g = acc.inverse().then(&holonomy.inverse());
    let ge = g.act(e);
    let jg = g.jacobian(e);
    let jm = super::flow::mat3_mul(&jg, &m);
    let f = field.velocity(e);
    let jf = std::array::from_fn(|i| (0..3).map(|k| jg[i][k] * f[k]).sum());
    Ok((ge, jm, jf))
}

fn residual(ge: PhasePoint, z: PhasePoint) -> [f64; 3] {
    [ge.x - z.x, ge.y - z.y, wrap_angle(ge.theta - z.theta)]
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `|h⁻¹Φ̃_t(z) − z|` with the angle taken modulo 2π.
pub fn closure_residual(field: &FlowField, z: PhasePoint, t: f64, holonomy: &Deck, tol: &Tolerances) -> Result<f64> {
    let (e, acc) = field.flow(z, t, tol)?;
    let g = acc.inverse().then(&holonomy.inverse());
    Ok(norm3(&residual(g.act(e), z)))
}

/// Solve for a closed orbit near the guess `(z, t)` in the conjugacy class of
/// `holonomy`; the guess is a closed orbit of `guess_field` (the same field
/// when polishing, the previous one when continuing). Multiple shooting over segments of at most unit length brings
/// the guess into the basin of the single-shooting map, which then polishes
/// the closure. Returns the start reduced to the fundamental domain, the
/// period, the holonomy re-expressed at the reduced start and the closure
/// residual.
pub fn close_orbit(
    field: &FlowField,
    guess_field: &FlowField,
    z: PhasePoint,
    t: f64,
    holonomy: &Deck,
    opts: &OrbitOptions,
) -> Result<(PhasePoint, f64, Deck, f64)> {
    let (z, t) = multiple_shooting(field, guess_field, z, t, holonomy, opts)?;
    let (z, t) = single_shooting(field, z, t, holonomy, opts)?;
    // re-express at the reduced start: h' = D h D⁻¹
    let (zr, d) = field.surface().reduce_phase(z)?;
    let zr = PhasePoint::new(zr.x, zr.y, wrap_angle(zr.theta));
    let h = d.inverse().then(holonomy).then(&d);
    let closure = closure_residual(field, zr, t, &h, &opts.tol)?;
    if !(closure < opts.accept_tol) {
        return Err(Error::Newton(format!("closure residual {closure:.3e} above {:.1e}", opts.accept_tol)));
    }
    Ok((zr, t, h, closure))
}

/// Shooting segment length; keeps the linearization valid for strongly
/// unstable orbits.
const SEGMENT_LENGTH: f64 = 1.0;

fn multiple_shooting(
    field: &FlowField,
    guess_field: &FlowField,
    z: PhasePoint,
    t: f64,
    holonomy: &Deck,
    opts: &OrbitOptions,
) -> Result<(PhasePoint, f64)> {
    let m = (t / SEGMENT_LENGTH).ceil().max(1.0) as usize;
    let tau = t / m as f64;
    // nodes along the guess and the deck maps carrying each lifted segment
    // end into the chart of the next node
    let mut nodes = vec![z];
    let mut connect = Vec::with_capacity(m);
    for i in 0..m - 1 {
        let (e, acc) = guess_field.flow(nodes[i], tau, &opts.tol)?;
        nodes.push(e);
        connect.push(acc);
    }
    let mut last = holonomy.inverse();
    for c in &connect {
        last = c.inverse().then(&last);
    }
    connect.push(last);
    let n = 3 * m + 1;
    let z_ref = z;
    let f_ref = field.velocity(z_ref);
    let mut t = t;
    let mut first = None;
    let mut best = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let tau = t / m as f64;
        let segs: Vec<_> = nodes.iter().map(|&zi| field.flow_with_tangent(zi, tau, &opts.tol)).collect::<Result<_>>()?;
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        let mut res: f64 = 0.0;
        for (i, (e, acc, mi)) in segs.iter().enumerate() {
            let g = acc.inverse().then(&connect[i]);
            let ge = g.act(*e);
            let jg = g.jacobian(*e);
            let jm = super::flow::mat3_mul(&jg, mi);
            let f = field.velocity(*e);
            let next = (i + 1) % m;
            let r = residual(ge, nodes[next]);
            res = res.max(norm3(&r));
            for p in 0..3 {
                b[3 * i + p] = -r[p];
                for q in 0..3 {
                    a[(3 * i + p, 3 * i + q)] += jm[p][q];
                }
                a[(3 * i + p, 3 * next + p)] -= 1.0;
                a[(3 * i + p, n - 1)] = (0..3).map(|k| jg[p][k] * f[k]).sum::<f64>() / m as f64;
            }
        }
        let dz = [nodes[0].x - z_ref.x, nodes[0].y - z_ref.y, nodes[0].theta - z_ref.theta];
        b[n - 1] = -(0..3).map(|k| f_ref[k] * dz[k]).sum::<f64>();
        for k in 0..3 {
            a[(n - 1, k)] = f_ref[k];
        }
        if !res.is_finite() {
            return Err(Error::Newton("non-finite residual".into()));
        }
        let first_res = *first.get_or_insert(res);
        if res > 1e3 * first_res.max(1e-6) {
            return Err(Error::Newton(format!("diverged: residual {res:.3e}")));
        }
        let stalled = res < 1e-9 && res > 0.5 * best;
        best = best.min(res);
        if res < opts.newton_tol || stalled {
            return Ok((nodes[0], t));
        }
        let d = a.lu().solve(&b).ok_or_else(|| Error::Newton("singular shooting matrix".into()))?;
        for (i, node) in nodes.iter_mut().enumerate() {
            *node = PhasePoint::new(node.x + d[3 * i], node.y + d[3 * i + 1], node.theta + d[3 * i + 2]);
            if !field.surface().in_chart(node.x, node.y) {
                return Err(Error::Newton("iterate left the admissible region".into()));
            }
        }
        t += d[n - 1];
        if !(t > 0.0) {
            return Err(Error::Newton("period became non-positive".into()));
        }
    }
    if best < opts.accept_tol {
        return Ok((nodes[0], t));
    }
    Err(Error::Newton(format!("no convergence after {} iterations", opts.max_iterations)))
}

/// Newton on the one-period map. Keeps the best iterate, so it never makes a
/// converged multiple-shooting solution worse.
fn single_shooting(field: &FlowField, z: PhasePoint, t: f64, holonomy: &Deck, opts: &OrbitOptions) -> Result<(PhasePoint, f64)> {
    let z_ref = z;
    let f_ref = field.velocity(z_ref);
    let (mut z, mut t) = (z, t);
    let mut best = (f64::INFINITY, z, t);
    for _ in 0..opts.max_iterations {
        let (ge, jm, jf) = match shoot(field, z, t, holonomy, &opts.tol) {
            Ok(v) => v,
            Err(_) => break,
        };
        let r = residual(ge, z);
        let res = norm3(&r);
        if !(res < best.0) {
            if res > 10.0 * best.0 || res < 1e-9 {
                break;
            }
        } else {
            best = (res, z, t);
        }
        if res < opts.newton_tol {
            break;
        }
        let phase: f64 = (0..3).map(|i| f_ref[i] * [z.x - z_ref.x, z.y - z_ref.y, z.theta - z_ref.theta][i]).sum();
        let mut a = Matrix4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = jm[i][j] - if i == j { 1.0 } else { 0.0 };
            }
            a[(i, 3)] = jf[i];
            a[(3, i)] = f_ref[i];
        }
        let b = Vector4::new(-r[0], -r[1], -r[2], -phase);
        let Some(d) = a.lu().solve(&b) else { break };
        z = PhasePoint::new(z.x + d[0], z.y + d[1], z.theta + d[2]);
        t += d[3];
        if !(t > 0.0) || !field.surface().in_chart(z.x, z.y) {
            break;
        }
    }
    Ok((best.1, best.2))
}

/// Conjugacy-class representatives: primitive, cyclically reduced words,
/// one per rotation class, shortest first then lexicographic.
pub fn primitive_cyclic_words(max_len: usize) -> Vec<Vec<Letter>> {
    fn extend(w: &mut Vec<Letter>, len: usize, out: &mut Vec<Vec<Letter>>) {
        if w.len() == len {
            if len > 1 && w[len - 1] == FuchsianGroup::inverse_letter(w[0]) {
                return;
            }
            let rotations = (1..len).map(|d| {
                let mut r = w[d..].to_vec();
                r.extend_from_slice(&w[..d]);
                r
            });
            for r in rotations {
                // a proper power equals one of its nontrivial rotations
                if r <= *w {
                    return;
                }
            }
            out.push(w.clone());
            return;
        }
        for k in 0..8u8 {
            if let Some(&last) = w.last() {
                if k == FuchsianGroup::inverse_letter(last) {
                    continue;
                }
            }
            w.push(k);
            extend(w, len, out);
            w.pop();
        }
    }
    let mut out = Vec::new();
    for len in 1..=max_len {
        extend(&mut Vec::new(), len, &mut out);
    }
    out
}

/// A point on the translation axis of a hyperbolic element (the axis point
/// closest to the origin, pointing towards the attracting fixed point) and
/// the translation length `2 arccosh(|tr|/2)`.
pub fn axis_seed(a: &crate::geometry::Mobius) -> Option<(PhasePoint, f64)> {
    let tr = a.trace().re.abs();
    if tr <= 2.0 + 1e-12 {
        return None;
    }
    let disc = ((a.a - a.d) * (a.a - a.d) + 4.0 * a.b * a.c).sqrt();
    let roots = [(a.a - a.d + disc) / (2.0 * a.c), (a.a - a.d - disc) / (2.0 * a.c)];
    let (plus, minus) = if a.derivative(roots[0]).norm() < 1.0 { (roots[0], roots[1]) } else { (roots[1], roots[0]) };
    let delta = (plus / minus).arg().abs();
    let mid = plus + minus;
    let p = if mid.norm() < 1e-14 {
        C::new(0.0, 0.0)
    } else {
        mid / mid.norm() * (PI / 4.0 - delta / 4.0).tan()
    };
    let theta = (plus - minus).arg();
    Some((PhasePoint::new(p.re, p.im, theta), 2.0 * (tr / 2.0).acosh()))
}

#[derive(Clone, Debug)]
pub struct OrbitTable {
    pub orbits: Vec<ClosedOrbit>,
    /// Conjugacy-class words tried.
    pub classes_tried: usize,
    /// `(dropped word, word of the orbit it duplicates)`.
    pub duplicates: Vec<(String, String)>,
    /// Words skipped with the reason.
    pub skipped: Vec<(String, String)>,
    /// Largest `|T − 2 arccosh(|tr|/2)|` over the table.
    pub max_period_error: f64,
}

/// Closed geodesics of the Bolza surface (`λ` switched off) for every
/// conjugacy class of words up to `max_len` letters.
pub fn enumerate_closed_geodesics(surface: &MagneticSurface, max_len: usize, opts: &OrbitOptions) -> Result<OrbitTable> {
    if surface.model() != SurfaceModel::BolzaOctagon {
        return Err(Error::Precondition("closed geodesic enumeration needs the Bolza model".into()));
    }
    let field = FlowField::new(Arc::new(surface.with_lambda_scaled(0.0)));
    let group = surface.group().unwrap().clone();
    let words = primitive_cyclic_words(max_len);
    let results: Vec<(String, Result<(ClosedOrbit, f64)>)> = words
        .par_iter()
        .map(|w| {
            let label = FuchsianGroup::word_string(w);
            let a = group.element(w);
            let res = (|| {
                let (seed, length) = axis_seed(&a).ok_or_else(|| Error::Precondition("not hyperbolic".into()))?;
                // seed sits on the axis of `a` in the disk; pull it into the domain
                let (z, d) = surface.reduce_phase(seed)?;
                let h = d.inverse().then(&Deck::Fuchsian { map: a, word: w.clone() }).then(&d);
                let (z, t, h, closure) = close_orbit(&field, &field, z, length, &h, opts)?;
                let samples = orbit_samples(&field, z, t, opts)?;
                let h = match h {
                    Deck::Fuchsian { map, .. } => Deck::Fuchsian { map, word: w.clone() },
                    other => other,
                };
                Ok((
                    ClosedOrbit { label: label.clone(), lambda_scale: 0.0, start: z, period: t, closure_error: closure, holonomy: h, samples },
                    (t - length).abs(),
                ))
            })();
            (label, res)
        })
        .collect();

    let mut table = OrbitTable {
        orbits: Vec::new(),
        classes_tried: words.len(),
        duplicates: Vec::new(),
        skipped: Vec::new(),
        max_period_error: 0.0,
    };
    let mut trajectories: Vec<Trajectory> = Vec::new();
    for (label, res) in results {
        let (orbit, period_err) = match res {
            Ok(v) => v,
            Err(e) => {
                table.skipped.push((label, e.to_string()));
                continue;
            }
        };
        let dup = table.orbits.iter().zip(&trajectories).find(|(o, tr)| {
            (o.period - orbit.period).abs() < 1e-9 * orbit.period.max(1.0) && on_orbit(surface, tr, orbit.start, 1e-6)
        });
        if let Some((o, _)) = dup {
            table.duplicates.push((label, o.label.clone()));
            continue;
        }
        table.max_period_error = table.max_period_error.max(period_err);
        trajectories.push(orbit.trajectory(&field, &opts.tol)?);
        table.orbits.push(orbit);
    }
    Ok(table)
}

/// Whether `p` lies on the recorded closed trajectory up to `tol`, allowing
/// for the boundary identifications of the fundamental domain.
pub fn on_orbit(surface: &MagneticSurface, tr: &Trajectory, p: PhasePoint, tol: f64) -> bool {
    distance_to_trajectory(surface, tr, p) < tol
}

pub fn distance_to_trajectory(surface: &MagneticSurface, tr: &Trajectory, p: PhasePoint) -> f64 {
    let mut images = vec![p];
    if let Some(g) = surface.group() {
        for k in 0..g.generator_count() as Letter {
            let (x, y, th) = g.generator(k).act(p.x, p.y, p.theta);
            if surface.in_domain(x, y, 0.05) {
                images.push(PhasePoint::new(x, y, th));
            }
        }
    } else {
        for s in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            images.push(PhasePoint::new(p.x + s[0], p.y + s[1], p.theta));
        }
    }
    let dist = |q: PhasePoint| images.iter().map(|&i| phase_distance(i, q)).fold(f64::INFINITY, f64::min);
    let mut best = (f64::INFINITY, 0usize, 0.0);
    for (si, seg) in tr.segments.iter().enumerate() {
        for j in 0..=8 {
            let t = seg.t0() + (seg.t1() - seg.t0()) * j as f64 / 8.0;
            let d = dist(seg.point(t));
            if d < best.0 {
                best = (d, si, t);
            }
        }
    }
    if !best.0.is_finite() {
        return best.0;
    }
    // golden-section refinement around the best sample
    let seg = &tr.segments[best.1];
    let w = (seg.t1() - seg.t0()) / 8.0;
    let (mut a, mut b) = ((best.2 - w).max(seg.t0()), (best.2 + w).min(seg.t1()));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if dist(seg.point(c)) < dist(seg.point(d)) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.min(dist(seg.point(0.5 * (a + b))))
}

/// Follow a closed orbit as the intensity is scaled from the orbit's current
/// `lambda_scale` to `target`, in `steps` equal increments; a failed Newton
/// solve halves the increment and a success doubles it back.
pub fn continue_orbit(orbit: &ClosedOrbit, base: &MagneticSurface, target: f64, steps: usize, opts: &OrbitOptions) -> Result<ClosedOrbit> {
    if target == orbit.lambda_scale {
        return Ok(orbit.clone());
    }
    let steps = steps.max(1);
    let mut mu = orbit.lambda_scale;
    let base_step = (target - mu) / steps as f64;
    let mut step = base_step;
    let (mut z, mut t, mut h) = (orbit.start, orbit.period, orbit.holonomy.clone());
    let mut closure = orbit.closure_error;
    let mut halvings = 0;
    let mut field = FlowField::new(Arc::new(base.with_lambda_scaled(mu)));
    while mu != target {
        let next = if (target - mu).abs() <= step.abs() * (1.0 + 1e-12) { target } else { mu + step };
        let f = FlowField::new(Arc::new(base.with_lambda_scaled(next)));
        match close_orbit(&f, &field, z, t, &h, opts) {
            Ok((z1, t1, h1, c1)) => {
                (z, t, h, closure) = (z1, t1, h1, c1);
                mu = next;
                field = f;
                halvings = 0;
                if step.abs() < base_step.abs() {
                    step *= 2.0;
                }
            }
            Err(e) => {
                halvings += 1;
                if halvings > opts.max_bisections {
                    return Err(Error::Newton(format!("continuation of {} stuck at scale {mu}: {e}", orbit.label)));
                }
                step *= 0.5;
            }
        }
    }
    let h = match (h, &orbit.holonomy) {
        (Deck::Fuchsian { map, .. }, Deck::Fuchsian { word, .. }) => Deck::Fuchsian { map, word: word.clone() },
        (h, _) => h,
    };
    Ok(ClosedOrbit {
        label: orbit.label.clone(),
        lambda_scale: target,
        start: z,
        period: t,
        closure_error: closure,
        holonomy: h,
        samples: orbit_samples(&field, z, t, opts)?,
    })
}

/// Continue every orbit of a table in parallel; failures are reported per
/// label and keep table order.
pub fn continue_table(
    orbits: &[ClosedOrbit],
    base: &MagneticSurface,
    target: f64,
    steps: usize,
    opts: &OrbitOptions,
) -> Vec<(String, Result<ClosedOrbit>)> {
    orbits.par_iter().map(|o| (o.label.clone(), continue_orbit(o, base, target, steps, opts))).collect()
}

/// Closed orbits of a flat torus with constant intensity: straight lines in
/// primitive homology classes `(p, q)` with `p² + q² ≤ max_norm²` when
/// `λ = 0`, otherwise circles of radius `1/|λ|` through a grid of starts.
pub fn flat_torus_orbits(surface: &Arc<MagneticSurface>, max_norm: i64, opts: &OrbitOptions) -> Result<Vec<ClosedOrbit>> {
    if surface.model() != SurfaceModel::FlatTorusConformal
        || !surface.conformal_factor().is_zero()
        || !surface.has_constant_lambda()
    {
        return Err(Error::Precondition("closed forms need a flat torus with constant intensity".into()));
    }
    let field = FlowField::new(surface.clone());
    let lam = surface.lambda_const();
    let mut seeds = Vec::new();
    if lam == 0.0 {
        for p in -max_norm..=max_norm {
            for q in -max_norm..=max_norm {
                if (p, q) == (0, 0) || p * p + q * q > max_norm * max_norm || gcd(p.abs(), q.abs()) != 1 {
                    continue;
                }
                let start = PhasePoint::new(0.25, 0.375, (q as f64).atan2(p as f64));
                seeds.push((format!("({p},{q})"), start, (p as f64).hypot(q as f64), Deck::Translation([p, q])));
            }
        }
    } else {
        let n = max_norm.max(1);
        for i in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let start = PhasePoint::new(s, 0.5 * s, 2.0 * PI * s);
            seeds.push((format!("circle{i}"), start, 2.0 * PI / lam.abs(), Deck::Translation([0, 0])));
        }
    }
    seeds
        .into_iter()
        .map(|(label, z, t, h)| {
            let closure = closure_residual(&field, z, t, &h, &opts.tol)?;
            Ok(ClosedOrbit { label, lambda_scale: 1.0, start: z, period: t, closure_error: closure, holonomy: h, samples: orbit_samples(&field, z, t, opts)? })
        })
        .collect()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_classes_counted() {
        let w = primitive_cyclic_words(2);
        // 8 letters, then 48 admissible ordered pairs up to rotation
        assert_eq!(w.len(), 8 + 24);
        assert!(w.iter().all(|w| w.len() < 2 || w[0] != w[1]));
        let w4 = primitive_cyclic_words(4);
        let mut seen = std::collections::BTreeSet::new();
        for w in &w4 {
            assert!(seen.insert(w.clone()));
            for i in 0..w.len() {
                assert_ne!(w[(i + 1) % w.len()], FuchsianGroup::inverse_letter(w[i]));
            }
        }
    }

    #[test]
    fn axis_seed_is_translated_along_axis() {
        let g = FuchsianGroup::bolza();
        for w in [vec![0u8], vec![1, 2], vec![0, 1, 5]] {
            let a = g.element(&w);
            let (p, l) = axis_seed(&a).unwrap();
            let z = C::new(p.x, p.y);
            let az = a.apply(z);
            assert!((crate::geometry::disk_distance(z, az) - l).abs() < 1e-9);
            // direction at the image equals the pushed-forward direction
            let (_, _, th) = a.act(p.x, p.y, p.theta);
            let toward = (az - z).arg();
            assert!(wrap_angle(toward - p.theta).abs() < 0.5 * PI);
            assert!(th.is_finite());
        }
    }

    #[test]
    fn generator_orbit_period_matches_trace() {
        let s = MagneticSurface::bolza(0.0);
        let g = s.group().unwrap();
        let opts = OrbitOptions::default();
        let field = FlowField::new(Arc::new(s.clone()));
        let a = g.element(&[0]);
        let (seed, length) = axis_seed(&a).unwrap();
        let expect = 2.0 * (a.trace().re.abs() / 2.0).acosh();
        assert!((length - expect).abs() < 1e-14);
        let (z, d) = s.reduce_phase(seed).unwrap();
        let h = d.inverse().then(&Deck::Fuchsian { map: a, word: vec![0] }).then(&d);
        let (_, t, _, closure) = close_orbit(&field, &field, z, length, &h, &opts).unwrap();
        assert!((t - expect).abs() < 1e-8 && closure < 1e-8);
    }

    #[test]
    fn conjugate_and_inverse_words() {
        let s = MagneticSurface::bolza(0.0);
        let g = s.group().unwrap();
        let opts = OrbitOptions::default();
        let field = FlowField::new(Arc::new(s.clone()));
        let build = |w: &[Letter]| {
            let a = g.element(w);
            let (seed, l) = axis_seed(&a).unwrap();
            let (z, d) = s.reduce_phase(seed).unwrap();
            let h = d.inverse().then(&Deck::Fuchsian { map: a, word: w.to_vec() }).then(&d);
            close_orbit(&field, &field, z, l, &h, &opts).unwrap()
        };
        let (z1, t1, ..) = build(&[0]);
        let (z2, t2, ..) = build(&[1, 0, 5]);
        let (z3, t3, ..) = build(&[4]);
        assert!((t1 - t2).abs() < 1e-9 && (t1 - t3).abs() < 1e-9);
        let tr = field.trajectory(z1, t1, &opts.tol).unwrap();
        assert!(on_orbit(&s, &tr, z2, 1e-6), "conjugate word traces the same orbit");
        assert!(!on_orbit(&s, &tr, z3, 1e-6), "inverse word runs the opposite way");
        let flipped = PhasePoint::new(z3.x, z3.y, z3.theta + PI);
        assert!(on_orbit(&s, &tr, flipped, 1e-6), "inverse word is the same geodesic reversed");
    }

    #[test]
    fn continuation_round_trip() {
        let s = MagneticSurface::bolza(1.0);
        let table = enumerate_closed_geodesics(&s, 1, &OrbitOptions::default()).unwrap();
        let opts = OrbitOptions::default();
        let seed = &table.orbits[0];
        assert!(continue_orbit(seed, &s, 0.0, 3, &opts).unwrap().start == seed.start);
        let up = continue_orbit(seed, &s, 0.2, 4, &opts).unwrap();
        assert!(up.closure_error < 1e-8 && (up.period - seed.period).abs() > 1e-6);
        let small = continue_orbit(seed, &s, 1e-4, 1, &opts).unwrap();
        let smaller = continue_orbit(seed, &s, 1e-5, 1, &opts).unwrap();
        assert!((smaller.period - seed.period).abs() < (small.period - seed.period).abs());
        let back = continue_orbit(&up, &s, 0.0, 4, &opts).unwrap();
        assert!((back.period - seed.period).abs() < 1e-8);
        let field = FlowField::new(Arc::new(s.with_lambda_scaled(0.0)));
        let tr = seed.trajectory(&field, &opts.tol).unwrap();
        assert!(distance_to_trajectory(&s, &tr, back.start) < 1e-8);
    }

    #[test]
    fn record_round_trip_recovers_holonomy() {
        let s = MagneticSurface::bolza(0.0);
        let opts = OrbitOptions::default();
        let table = enumerate_closed_geodesics(&s, 2, &opts).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &table.orbits).unwrap();
        let recs = read_jsonl(&buf[..]).unwrap();
        assert_eq!(recs.len(), table.orbits.len());
        let field = FlowField::new(Arc::new(s));
        for (r, o) in recs.iter().zip(&table.orbits) {
            let back = ClosedOrbit::from_record(r, &field, &opts).unwrap();
            assert!(back.closure_error < 1e-8, "{}", r.label);
            assert_eq!((&back.label, back.period, back.start), (&r.label, r.period, r.start));
            assert!(o.closure_error < 1e-8);
        }
    }

    #[test]
    fn flat_torus_lines_and_circles() {
        let opts = OrbitOptions::default();
        let lines = flat_torus_orbits(&Arc::new(MagneticSurface::flat_torus(0.0)), 2, &opts).unwrap();
        assert_eq!(lines.len(), 8);
        assert!(lines.iter().all(|o| o.closure_error < 1e-9));
        let circles = flat_torus_orbits(&Arc::new(MagneticSurface::flat_torus(3.0)), 3, &opts).unwrap();
        assert!(circles.iter().all(|o| o.closure_error < 1e-9 && (o.period - 2.0 * PI / 3.0).abs() < 1e-15));
    }
}

