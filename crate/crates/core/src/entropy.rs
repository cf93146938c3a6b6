//! Entropy production of thermostat perturbations `λ + s·q̂` of a magnetic
//! flow, and its second-order comparison with the variance of `V(q̂)`.
//!
//! The perturbed generator `X + (λ + s q̂)V` has divergence `s V(q̂)` with
//! respect to the Liouville measure, so the entropy production of its
//! physical measure `ρ_s` is `e(s) = −s ∫ V(q̂) dρ_s`. Near `s = 0` this
//! behaves like `s²/2` times the variance `Var(V(q̂)) = ∫ σ(t) dt` of the
//! correlation function `σ(t) = ∫ F∘ψ_t · F dμ − (∫F dμ)²`.
//!
//! Statistics here are Monte Carlo: correlations average over independent
//! Liouville-distributed trajectories and over time origins along each of
//! them, and `ρ_s` averages are long-time averages along perturbed
//! trajectories after a burn-in.

use crate::dynamics::{FlowField, Tolerances};
use crate::error::{Error, Result};
use crate::fiber::{FiberFunction, PhaseGrid};
use crate::geometry::{MagneticSurface, PhasePoint};
use crate::quadrature::gauss_legendre;
use crate::report::{Check, ExperimentReport};
use crate::tomography::{PhaseFunction, SymmetricTensor, TensorForcing};
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `s · V(q̂)` on the grid.
pub fn perturbed_divergence(q: &SymmetricTensor, s: f64, grid: &Arc<PhaseGrid>) -> Result<FiberFunction> {
    Ok(q.lift(grid)?.apply_v().scale(C::new(s, 0.0)))
}

/// Pointwise `s · ∂θ q̂`, evaluated from the tensor itself.
#[derive(Clone, Debug)]
pub struct DivergenceDensity {
    forcing: TensorForcing,
    s: f64,
}

impl DivergenceDensity {
    pub fn new(q: &SymmetricTensor, s: f64, surface: Arc<MagneticSurface>) -> Result<Self> {
        Ok(Self { forcing: TensorForcing::new(q.clone(), surface)?, s })
    }
}

impl PhaseFunction for DivergenceDensity {
    fn value_at(&self, p: PhasePoint) -> C {
        let (_, grad) = crate::dynamics::Forcing::jet(&self.forcing, p);
        C::new(self.s * grad[2], 0.0)
    }
}

/// Seeded generator for the `index`-th independent sample.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationOptions {
    /// Number of independent Liouville-distributed trajectories.
    pub samples: usize,
    pub t_max: f64,
    pub dt: f64,
    /// Span of time origins averaged along each trajectory.
    pub origin_span: f64,
    pub seed: u64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self { samples: 10_000, t_max: 40.0, dt: 0.1, origin_span: 40.0, seed: 0, rtol: 1e-9, atol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Liouville mean of `F` and its standard error.
    pub mean: f64,
    pub mean_stderr: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// `2∫₀^{t_max} σ`.
    pub value: f64,
    pub stderr: f64,
    /// Bound on `2∫_{t_max}^∞ |σ|` from an exponential envelope.
    pub tail_bound: f64,
    /// Fitted envelope decay rate.
    pub decay_rate: f64,
    /// Whether `σ` has fallen into the noise over the last quarter of the
    /// horizon. When it has not the estimate is unreliable.
    pub decayed: bool,
    pub correlation: CorrelationEstimate,
}

struct SampleStats {
    lagged: Vec<f64>,
    mean: f64,
    integral: f64,
}

/// Values of `f` every `dt` along a trajectory of length `n·dt` from `z0`.
fn sample_along<F: PhaseFunction + ?Sized>(f: &F, field: &FlowField, z0: PhasePoint, dt: f64, n: usize, tol: &Tolerances) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    let t_end = n as f64 * dt;
    field.visit(z0, t_end, tol, |step| {
        let t1 = step.t1();
        while out.len() <= n {
            let t = out.len() as f64 * dt;
            if t > t1 + 1e-12 {
                break;
            }
            let p = PhasePoint::new(step.component(0, t), step.component(1, t), step.component(2, t));
            out.push(f.value_at(p).re);
        }
        Ok(())
    })?;
    if out.len() != n + 1 {
        return Err(Error::Integrator(format!("sampled {} of {} points", out.len(), n + 1)));
    }
    Ok(out)
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

fn correlation_samples<F: PhaseFunction + ?Sized>(f: &F, field: &FlowField, opts: &CorrelationOptions) -> Result<(Vec<f64>, Vec<SampleStats>)> {
    if !(opts.samples >= 2 && opts.dt > 0.0 && opts.t_max >= opts.dt && opts.origin_span >= 0.0) {
        return Err(Error::Precondition("correlation needs two samples, a positive step and a horizon of at least one step".into()));
    }
    let lags = (opts.t_max / opts.dt).round() as usize;
    let origins = (opts.origin_span / opts.dt).round() as usize;
    let tol = Tolerances::new(opts.rtol, opts.atol);
    let surface = field.surface();
    let stats: Vec<SampleStats> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(opts.seed, i as u64);
            let z0 = surface.sample_liouville(&mut rng);
            let v = sample_along(f, field, z0, opts.dt, lags + origins, &tol)?;
            let inv = 1.0 / (origins + 1) as f64;
            let lagged: Vec<f64> = (0..=lags).map(|l| (0..=origins).map(|j| v[j + l] * v[j]).sum::<f64>() * inv).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let integral = 2.0 * trapezoid(&lagged, opts.dt);
            Ok(SampleStats { lagged, mean, integral })
        })
        .collect::<Result<_>>()?;
    let times = (0..=lags).map(|l| l as f64 * opts.dt).collect();
    Ok((times, stats))
}

fn assemble_correlation(times: Vec<f64>, stats: &[SampleStats]) -> CorrelationEstimate {
    let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    let (mean, mean_stderr) = mean_and_stderr(&means);
    let mut values = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    let mut column = vec![0.0; stats.len()];
    for l in 0..times.len() {
        for (c, s) in column.iter_mut().zip(stats) {
            *c = s.lagged[l];
        }
        let (m, e) = mean_and_stderr(&column);
        values.push(m - mean * mean);
        stderr.push(e);
    }
    CorrelationEstimate { times, values, stderr, mean, mean_stderr, samples: stats.len() }
}

/// Monte Carlo estimate of `σ(t)` on `[0, t_max]`.
pub fn correlation_function<F: PhaseFunction + ?Sized>(f: &F, field: &FlowField, opts: &CorrelationOptions) -> Result<CorrelationEstimate> {
    let (times, stats) = correlation_samples(f, field, opts)?;
    Ok(assemble_correlation(times, &stats))
}

/// `Var(F) = 2∫₀^∞ σ`, truncated at `t_max`, with a tail bound.
pub fn variance<F: PhaseFunction + ?Sized>(f: &F, field: &FlowField, opts: &CorrelationOptions) -> Result<VarianceEstimate> {
    let (times, stats) = correlation_samples(f, field, opts)?;
    let corr = assemble_correlation(times, &stats);
    let integrals: Vec<f64> = stats.iter().map(|s| s.integral).collect();
    let (raw, raw_err) = mean_and_stderr(&integrals);
    let value = raw - 2.0 * opts.t_max * corr.mean * corr.mean;
    // the subtracted mean is itself uncertain
    let stderr = raw_err.hypot(4.0 * opts.t_max * corr.mean.abs() * corr.mean_stderr);

    // last quarter of the horizon: has σ reached the noise floor?
    let n = corr.values.len();
    let q0 = (3 * n) / 4;
    let last: Vec<f64> = corr.values[q0..].to_vec();
    let last_mean = last.iter().sum::<f64>() / last.len() as f64;
    let last_err = corr.stderr[q0..].iter().sum::<f64>() / last.len() as f64;
    let scale = corr.values[0].abs();
    let decayed = last_mean.abs() <= (3.0 * last_err).max(1e-3 * scale);

    // exponential envelope of |σ| fitted where it stands above the noise
    let pts: Vec<(f64, f64)> = corr
        .times
        .iter()
        .zip(&corr.values)
        .zip(&corr.stderr)
        .filter(|((_, v), e)| v.abs() > 3.0 * **e && v.abs() > 0.0)
        .map(|((t, v), _)| (*t, v.abs().ln()))
        .collect();
    let mut rate = 0.0;
    if pts.len() >= 3 {
        let m = pts.len() as f64;
        let (st, sl) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (tb, lb) = (st / m, sl / m);
        let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - tb) * (p.1 - lb), a.1 + (p.0 - tb) * (p.0 - tb)));
        if den > 0.0 {
            rate = -num / den;
        }
    }
    if rate <= 0.0 {
        rate = 1.0 / opts.t_max;
    }
    let tail_bound = 2.0 * (last_mean.abs() + 3.0 * last_err) / rate;
    Ok(VarianceEstimate { value, stderr, tail_bound, decay_rate: rate, decayed, correlation: corr })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyOptions {
    pub s_values: Vec<f64>,
    pub trajectories: usize,
    /// Averaging time per trajectory, after the burn-in.
    pub length: f64,
    pub burn_in: f64,
    pub seed: u64,
    /// Largest standard deviation of the per-trajectory averages of `V(q̂)`
    /// accepted as converged.
    pub max_spread: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self {
            s_values: vec![-0.04, -0.02, 0.0, 0.02, 0.04],
            trajectories: 8,
            length: 1e4,
            burn_in: 20.0,
            seed: 0,
            max_spread: 1.0,
            rtol: 1e-9,
            atol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub s: f64,
    /// `e(s) = −s · ⟨V(q̂)⟩_s`.
    pub production: f64,
    pub stderr: f64,
    /// Time average of `V(q̂)` under the perturbed flow.
    pub mean_derivative: f64,
    /// Standard deviation of the per-trajectory averages.
    pub spread: f64,
    pub converged: bool,
}

/// `e(s)` for each requested `s` from time averages along trajectories of
/// `X + (λ + s q̂)V`. All values of `s` start from the same seeded
/// Liouville-distributed points. At `s = 0` the production vanishes
/// identically and nothing is integrated.
pub fn entropy_production_curve(q: &SymmetricTensor, surface: &Arc<MagneticSurface>, opts: &EntropyOptions) -> Result<Vec<EntropyPoint>> {
    if opts.trajectories < 2 || !(opts.length > 0.0) || opts.burn_in < 0.0 {
        return Err(Error::Precondition("entropy curve needs two trajectories and a positive length".into()));
    }
    if q.degree != 2 {
        return Err(Error::Precondition(format!("thermostat perturbation must be a 2-tensor, got degree {}", q.degree)));
    }
    let forcing = Arc::new(TensorForcing::new(q.clone(), surface.clone())?);
    let derivative = DivergenceDensity { forcing: (*forcing).clone(), s: 1.0 };
    let tol = Tolerances::new(opts.rtol, opts.atol);
    let starts: Vec<PhasePoint> = (0..opts.trajectories).map(|i| surface.sample_liouville(&mut sample_rng(opts.seed, i as u64))).collect();
    let tasks: Vec<(usize, usize)> = (0..opts.s_values.len())
        .filter(|&k| opts.s_values[k] != 0.0)
        .flat_map(|k| (0..opts.trajectories).map(move |i| (k, i)))
        .collect();
    let (x5, w5) = gauss_legendre(5);
    let averages: Vec<((usize, usize), f64)> = tasks
        .par_iter()
        .map(|&(k, i)| {
            let field = FlowField::new(surface.clone()).with_forcing(opts.s_values[k], forcing.clone());
            let (z, _) = field.flow(starts[i], opts.burn_in, &tol)?;
            let mut acc = 0.0;
            field.visit(z, opts.length, &tol, |step| {
                let (m, h) = (step.t0 + 0.5 * step.h, 0.5 * step.h);
                for (x, w) in x5.iter().zip(&w5) {
                    let t = m + h * x;
                    let p = PhasePoint::new(step.component(0, t), step.component(1, t), step.component(2, t));
                    acc += w * h * derivative.value_at(p).re;
                }
                Ok(())
            })?;
            Ok(((k, i), acc / opts.length))
        })
        .collect::<Result<_>>()?;
    Ok(opts
        .s_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            if s == 0.0 {
                return EntropyPoint { s, production: 0.0, stderr: 0.0, mean_derivative: f64::NAN, spread: 0.0, converged: true };
            }
            let per: Vec<f64> = averages.iter().filter(|(key, _)| key.0 == k).map(|(_, a)| *a).collect();
            let (m, se) = mean_and_stderr(&per);
            let spread = se * (per.len() as f64).sqrt();
            EntropyPoint { s, production: -s * m, stderr: s.abs() * se, mean_derivative: m, spread, converged: spread <= opts.max_spread }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondDerivativeOptions {
    /// Allowed relative deviation of `e''(0)` from the variance.
    pub rel_tol: f64,
    /// Number of standard errors granted to noisy comparisons.
    pub sigmas: f64,
}

impl Default for SecondDerivativeOptions {
    fn default() -> Self {
        Self { rel_tol: 0.2, sigmas: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivativeSummary {
    pub first_derivative: f64,
    pub first_stderr: f64,
    pub second_derivative: f64,
    pub second_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub relative_error: f64,
    /// Standard error of the relative error.
    pub relative_stderr: f64,
    /// The statistical error exceeds the tolerance, so agreement cannot be
    /// decided.
    pub inconclusive: bool,
    pub agrees: bool,
}

/// Compare central differences of `e` at zero with the variance.
///
/// The curve must contain symmetric pairs `±h`; `e(0) = 0` is used exactly.
/// The first derivative `−(m(h) + m(−h))/2` has noise independent of `h`
/// and bias `O(h²)`, so the narrowest pair is used. The second derivative
/// `(e(h) + e(−h))/h²` has noise `∝ 1/h`, so the widest pair is used.
pub fn second_derivative_check(
    curve: &[EntropyPoint],
    var: &VarianceEstimate,
    opts: &SecondDerivativeOptions,
) -> Result<(ExperimentReport, SecondDerivativeSummary)> {
    let mut pairs: Vec<(&EntropyPoint, &EntropyPoint)> = curve
        .iter()
        .filter(|p| p.s > 0.0)
        .filter_map(|p| curve.iter().find(|m| (m.s + p.s).abs() <= 1e-12 * p.s).map(|m| (p, m)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Precondition("entropy curve has no symmetric pair ±h".into()));
    }
    pairs.sort_by(|a, b| a.0.s.total_cmp(&b.0.s));
    let (pn, mn) = pairs[0];
    let h = pn.s;
    let first = (pn.production - mn.production) / (2.0 * h);
    let first_stderr = pn.stderr.hypot(mn.stderr) / (2.0 * h);
    let (pw, mw) = pairs[pairs.len() - 1];
    let h = pw.s;
    let second = (pw.production + mw.production) / (h * h);
    let second_stderr = pw.stderr.hypot(mw.stderr) / (h * h);

    let v = var.value;
    let relative_error = (second - v).abs() / v.abs();
    let relative_stderr = (second_stderr / v).hypot(second * var.stderr.hypot(var.tail_bound) / (v * v)).abs();
    let inconclusive = !(relative_stderr <= opts.rel_tol) || !var.decayed;
    let summary = SecondDerivativeSummary {
        first_derivative: first,
        first_stderr,
        second_derivative: second,
        second_stderr,
        variance: v,
        variance_stderr: var.stderr,
        relative_error,
        relative_stderr,
        inconclusive,
        agrees: !inconclusive && relative_error <= opts.rel_tol,
    };
    let mut rep = ExperimentReport::new("entropy_second_derivative");
    rep.check(Check::at_most("first_derivative", "|e'(0)| within the stated number of standard errors", first.abs(), opts.sigmas * first_stderr));
    let worst = curve.iter().map(|p| p.production + opts.sigmas * p.stderr).fold(f64::INFINITY, f64::min);
    rep.check(Check::at_least("nonnegative", "e(s) + k·stderr ≥ 0 at every s", worst, 0.0));
    rep.check(Check::flag("converged", "per-trajectory averages agree", curve.iter().all(|p| p.converged)));
    rep.check(Check::flag("conclusive", "statistical error within tolerance and correlation decayed", !inconclusive));
    rep.check(Check::at_most("second_derivative", "|e''(0) − Var| / Var", relative_error, opts.rel_tol));
    rep.metric("first_derivative", first)
        .metric("first_stderr", first_stderr)
        .metric("second_derivative", second)
        .metric("second_stderr", second_stderr)
        .metric("variance", v)
        .metric("variance_stderr", var.stderr)
        .metric("variance_tail_bound", var.tail_bound)
        .metric("relative_error", relative_error)
        .metric("relative_stderr", relative_stderr);
    Ok((rep, summary))
}
