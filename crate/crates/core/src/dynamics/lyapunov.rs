//! Lyapunov exponents of the linearized flow and the combined hyperbolicity
//! diagnostic.

use super::flow::{FlowField, Mat3, IDENTITY3};
use super::ode::Tolerances;
use super::riccati::{riccati_solve, RiccatiOptions};
use crate::error::{Error, Result};
use crate::geometry::PhasePoint;
use crate::report::{Check, ExperimentReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovOptions {
    /// Time between re-orthonormalizations.
    pub interval: f64,
    /// Initial time discarded while the frame aligns.
    pub burn_in: f64,
    /// Number of batches used for the error bar.
    pub batches: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self { interval: 1.0, burn_in: 5.0, batches: 10, rtol: 1e-10, atol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Leading exponent.
    pub exponent: f64,
    /// Standard error from batch means.
    pub stderr: f64,
    /// All three exponents, in decreasing order of the QR columns.
    pub spectrum: [f64; 3],
    pub duration: f64,
}

/// Gram–Schmidt on the columns of `m`; returns `Q` and the diagonal of `R`.
fn qr(m: &Mat3) -> (Mat3, [f64; 3]) {
    let mut q = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for j in 0..3 {
        let mut v = [m[0][j], m[1][j], m[2][j]];
        // two passes keep the columns orthogonal to round-off
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = (0..3).map(|i| q[i][k] * v[i]).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= dot * q[i][k];
                }
            }
        }
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        r[j] = n;
        for i in 0..3 {
            q[i][j] = v[i] / n;
        }
    }
    (q, r)
}

/// Exponents of the variational equation along the orbit of `z0`, with the
/// tangent frame re-orthonormalized every `interval`.
pub fn lyapunov_spectrum(field: &FlowField, z0: PhasePoint, duration: f64, opts: &LyapunovOptions) -> Result<LyapunovEstimate> {
    if !(opts.interval > 0.0) || opts.batches == 0 {
        return Err(Error::Precondition("interval and batch count must be positive".into()));
    }
    let tol = Tolerances::new(opts.rtol, opts.atol);
    let steps = (duration / opts.interval).round() as usize;
    let burn = (opts.burn_in / opts.interval).round() as usize;
    let per_batch = steps / opts.batches;
    if per_batch == 0 {
        return Err(Error::Precondition("duration too short for the requested batches".into()));
    }
    let mut z = z0;
    let mut q = IDENTITY3;
    let mut batch = [0.0; 3];
    let mut batch_firsts = Vec::with_capacity(opts.batches);
    let mut totals = [0.0; 3];
    for step in 0..burn + per_batch * opts.batches {
        let (z1, _, m) = field.flow_with_tangent_from(z, q, opts.interval, &tol)?;
        let (q1, r) = qr(&m);
        z = z1;
        q = q1;
        if step < burn {
            continue;
        }
        for k in 0..3 {
            batch[k] += r[k].ln();
        }
        if (step - burn + 1).is_multiple_of(per_batch) {
            let t = per_batch as f64 * opts.interval;
            batch_firsts.push(batch[0] / t);
            for k in 0..3 {
                totals[k] += batch[k];
            }
            batch = [0.0; 3];
        }
    }
    let t_total = (per_batch * opts.batches) as f64 * opts.interval;
    let b = batch_firsts.len() as f64;
    let mean = batch_firsts.iter().sum::<f64>() / b;
    let var = batch_firsts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0).max(1.0);
    Ok(LyapunovEstimate {
        exponent: mean,
        stderr: (var / b).sqrt(),
        spectrum: totals.map(|s| s / t_total),
        duration: t_total,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperbolicityOptions {
    pub riccati_length: f64,
    pub riccati: RiccatiOptions,
    pub lyapunov_time: f64,
    pub lyapunov: LyapunovOptions,
    /// Riccati separation regarded as bounded away from zero.
    pub min_separation: f64,
    /// Exponent (less three standard errors) regarded as positive.
    pub min_exponent: f64,
}

impl Default for HyperbolicityOptions {
    fn default() -> Self {
        Self {
            riccati_length: 20.0,
            riccati: RiccatiOptions::default(),
            lyapunov_time: 200.0,
            lyapunov: LyapunovOptions::default(),
            min_separation: 1e-3,
            min_exponent: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicitySummary {
    /// Infimum of `r⁺ − r⁻` over the sampled orbits; `None` for perturbed
    /// flows, where the Riccati equation is not posed, and on blow-up.
    pub separation: Option<f64>,
    pub riccati_blow_up: bool,
    pub max_riccati_residual: f64,
    pub exponent: f64,
    pub stderr: f64,
    pub anosov_consistent: bool,
}

/// Riccati separation and leading Lyapunov exponent along trajectories from
/// `starts`. The flag requires the separation (when defined) to exceed
/// `min_separation` and the exponent to exceed `min_exponent` by three
/// standard errors.
pub fn hyperbolicity_report(field: &FlowField, starts: &[PhasePoint], opts: &HyperbolicityOptions) -> Result<(ExperimentReport, HyperbolicitySummary)> {
    if starts.is_empty() {
        return Err(Error::Precondition("at least one start point is needed".into()));
    }
    let perturbed = field.forcing_strength() != 0.0;
    let per_start: Vec<_> = starts
        .par_iter()
        .map(|&z| {
            let ric = if perturbed { None } else { Some(riccati_solve(field, z, opts.riccati_length, &opts.riccati)) };
            let lyap = lyapunov_spectrum(field, z, opts.lyapunov_time, &opts.lyapunov);
            (ric, lyap)
        })
        .collect();
    let mut separation = f64::INFINITY;
    let mut blow_up = false;
    let mut max_res: f64 = 0.0;
    let mut exps = Vec::new();
    let mut errs = Vec::new();
    for (ric, lyap) in per_start {
        match ric {
            Some(Ok(p)) => {
                separation = separation.min(p.separation);
                max_res = max_res.max(p.max_residual);
            }
            Some(Err(Error::RiccatiBlowUp(_))) => blow_up = true,
            Some(Err(e)) => return Err(e),
            None => {}
        }
        let l = lyap?;
        exps.push(l.exponent);
        errs.push(l.stderr);
    }
    let n = exps.len() as f64;
    let exponent = exps.iter().sum::<f64>() / n;
    let stderr = (errs.iter().map(|e| e * e).sum::<f64>()).sqrt() / n;
    let separation = if perturbed || blow_up { None } else { Some(separation) };
    let sep_ok = if perturbed { true } else { separation.is_some_and(|s| s > opts.min_separation) };
    let anosov = sep_ok && exponent - 3.0 * stderr > opts.min_exponent;
    let summary = HyperbolicitySummary {
        separation,
        riccati_blow_up: blow_up,
        max_riccati_residual: max_res,
        exponent,
        stderr,
        anosov_consistent: anosov,
    };
    let mut rep = ExperimentReport::new("hyperbolicity");
    if !perturbed && !blow_up {
        rep.check(Check::below("riccati_residual", "max |ṙ + r² + 𝕂| along sampled orbits", max_res, 1e-6));
    }
    rep.metric("separation", summary.separation)
        .metric("riccati_blow_up", blow_up)
        .metric("lyapunov_exponent", exponent)
        .metric("lyapunov_stderr", stderr)
        .metric("anosov_consistent", anosov)
        .metric("starts", starts.len());
    if perturbed {
        rep.note("perturbed flow: Riccati separation not defined, flag uses the Lyapunov exponent only");
    }
    Ok((rep, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MagneticSurface;
    use std::sync::Arc;

    fn field(s: MagneticSurface) -> FlowField {
        FlowField::new(Arc::new(s))
    }

    /// For constant `𝕂 < 0` the linearized flow splits into the flow
    /// direction and a Jacobi-type pair with rates `±√(−𝕂)`.
    #[test]
    fn constant_curvature_rates() {
        for lam in [0.0, 0.5] {
            let f = field(MagneticSurface::bolza(lam));
            let est = lyapunov_spectrum(&f, PhasePoint::new(0.1, -0.2, 0.4), 200.0, &LyapunovOptions::default()).unwrap();
            let expect = (1.0f64 - lam * lam).sqrt();
            assert!((est.exponent - expect).abs() < 0.05, "λ = {lam}: {est:?}");
            assert!(est.spectrum[1].abs() < 0.05 && (est.spectrum[2] + expect).abs() < 0.05, "{est:?}");
            // The Liouville density in chart coordinates is e^{2φ}, so the
            // log-determinant is a bounded boundary term rather than zero.
            let log_det = est.spectrum.iter().sum::<f64>() * est.duration;
            assert!(log_det.abs() < 3.0, "{log_det}");
        }
    }

    #[test]
    fn bolza_is_anosov_consistent_and_torus_is_not() {
        let starts = [PhasePoint::new(0.1, 0.2, 0.3), PhasePoint::new(-0.3, 0.1, 2.0)];
        let (rep, s) = hyperbolicity_report(&field(MagneticSurface::bolza(0.0)), &starts, &HyperbolicityOptions::default()).unwrap();
        assert!(s.anosov_consistent && rep.passed());
        assert!((s.exponent - 1.0).abs() < 0.05, "{s:?}");
        let (_, s) = hyperbolicity_report(&field(MagneticSurface::flat_torus(0.0)), &starts, &HyperbolicityOptions::default()).unwrap();
        assert!(!s.anosov_consistent);
        assert!(s.exponent < 0.05, "{s:?}");
    }

    #[test]
    fn exponent_decreases_with_intensity() {
        let z = [PhasePoint::new(0.05, 0.1, 1.0)];
        let opts = HyperbolicityOptions::default();
        let (_, weak) = hyperbolicity_report(&field(MagneticSurface::bolza(0.2)), &z, &opts).unwrap();
        let (_, strong) = hyperbolicity_report(&field(MagneticSurface::bolza(0.95)), &z, &opts).unwrap();
        assert!(weak.anosov_consistent && strong.anosov_consistent);
        assert!(strong.exponent < weak.exponent);
    }

    #[test]
    fn orientation_flip_leaves_rates_unchanged() {
        let z = PhasePoint::new(0.05, 0.1, 1.0);
        let a = lyapunov_spectrum(&field(MagneticSurface::bolza(0.4)), z, 100.0, &LyapunovOptions::default()).unwrap();
        let b = lyapunov_spectrum(&field(MagneticSurface::bolza(-0.4)), z, 100.0, &LyapunovOptions::default()).unwrap();
        assert!((a.exponent - b.exponent).abs() < 0.05);
    }
}
