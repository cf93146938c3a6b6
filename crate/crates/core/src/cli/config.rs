//! Experiment configuration. Every section has defaults matching the
//! acceptance budgets, so an empty file is a valid configuration.

use crate::dynamics::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{BaseFunction, MagneticSurface, RealTerm};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory. Not serialised, so records written to different
    /// directories are identical.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub surface: SurfaceBlock,
    pub frame: FrameConfig,
    pub pestov: PestovConfig,
    pub alpha: AlphaConfig,
    pub orbits: OrbitsConfig,
    pub riccati: RiccatiConfig,
    pub ray: RayConfig,
    pub transport: TransportConfig,
    pub entropy: EntropyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("magtomo-out"),
            surface: SurfaceBlock::default(),
            frame: FrameConfig::default(),
            pestov: PestovConfig::default(),
            alpha: AlphaConfig::default(),
            orbits: OrbitsConfig::default(),
            riccati: RiccatiConfig::default(),
            ray: RayConfig::default(),
            transport: TransportConfig::default(),
            entropy: EntropyConfig::default(),
        }
    }
}

/// The surfaces shared by the spectral experiments: one conformally flat
/// torus with variable intensity and the Bolza surface at several constant
/// intensities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceBlock {
    pub torus_phi: Vec<RealTerm>,
    pub torus_lambda: Vec<RealTerm>,
    pub bolza_lambdas: Vec<f64>,
    pub torus_grid: usize,
    pub bolza_grid: usize,
    pub band_limit: usize,
}

impl Default for SurfaceBlock {
    fn default() -> Self {
        Self {
            torus_phi: vec![
                RealTerm { n: [1, 0], cos: 0.05, sin: 0.02 },
                RealTerm { n: [0, 1], cos: -0.03, sin: 0.04 },
                RealTerm { n: [1, -1], cos: 0.02, sin: 0.0 },
            ],
            torus_lambda: vec![
                RealTerm { n: [0, 0], cos: 0.4, sin: 0.0 },
                RealTerm { n: [0, 1], cos: 0.15, sin: -0.1 },
                RealTerm { n: [1, 1], cos: 0.05, sin: 0.08 },
            ],
            bolza_lambdas: vec![0.0, 0.2, 0.5],
            torus_grid: 64,
            bolza_grid: 96,
            band_limit: 12,
        }
    }
}

impl SurfaceBlock {
    pub fn torus(&self) -> Result<MagneticSurface> {
        MagneticSurface::torus(BaseFunction::from_real_terms(&self.torus_phi), BaseFunction::from_real_terms(&self.torus_lambda))
            .map_err(|e| Error::Config(format!("surface: {e}")))
    }

    /// The torus followed by the Bolza surfaces.
    pub fn all(&self) -> Result<Vec<MagneticSurface>> {
        let mut v = vec![self.torus()?];
        v.extend(self.bolza_lambdas.iter().map(|&l| MagneticSurface::bolza(l)));
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    pub samples: usize,
    pub max_degree: usize,
    pub tolerance: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { samples: 50, max_degree: 4, tolerance: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PestovConfig {
    pub samples: usize,
    pub max_degree: usize,
    pub tolerance: f64,
    pub area_tolerance: f64,
}

impl Default for PestovConfig {
    fn default() -> Self {
        Self { samples: 100, max_degree: 4, tolerance: 1e-8, area_tolerance: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaConfig {
    pub samples: usize,
    pub max_degree: usize,
    /// Constant intensity of the flat control torus.
    pub control_lambda: f64,
    pub control_grid: usize,
    pub gap_degree: i32,
    pub gap_samples: usize,
    pub gap_max_degree: usize,
    pub slack_tolerance: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            max_degree: 4,
            control_lambda: 1.0,
            control_grid: 32,
            gap_degree: 2,
            gap_samples: 20,
            gap_max_degree: 5,
            slack_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitsConfig {
    pub max_word_length: usize,
    /// Intensity the λ = 0 table is continued to.
    pub continue_to: f64,
    pub continuation_steps: usize,
    pub rtol: f64,
    pub closure_tolerance: f64,
    pub period_tolerance: f64,
}

impl Default for OrbitsConfig {
    fn default() -> Self {
        Self { max_word_length: 4, continue_to: 0.2, continuation_steps: 4, rtol: 1e-13, closure_tolerance: 1e-8, period_tolerance: 1e-8 }
    }
}

impl OrbitsConfig {
    pub fn options(&self) -> crate::dynamics::OrbitOptions {
        crate::dynamics::OrbitOptions { tol: Tolerances::new(self.rtol, self.rtol), accept_tol: self.closure_tolerance, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiccatiConfig {
    pub starts: usize,
    pub length: f64,
    pub lambda: f64,
    pub tolerance: f64,
    pub flat_separation: f64,
    pub lyapunov_time: f64,
}

impl Default for RiccatiConfig {
    fn default() -> Self {
        Self { starts: 4, length: 20.0, lambda: 0.2, tolerance: 1e-6, flat_separation: 1e-3, lyapunov_time: 200.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RayConfig {
    pub fields: usize,
    pub lambdas: Vec<f64>,
    pub grid: usize,
    pub tolerance: f64,
    pub rtol: f64,
    pub panel_tolerance: f64,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self { fields: 20, lambdas: vec![0.0, 0.2], grid: 96, tolerance: 1e-6, rtol: 1e-12, panel_tolerance: 1e-11 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportConfig {
    pub cases: usize,
    /// Constant intensity of the flat torus.
    pub flat_lambda: f64,
    pub flat_grid: usize,
    /// The curved torus of the surface block is solved on this grid.
    pub curved_grid: usize,
    pub band: usize,
    pub base_band: i32,
    pub tolerance: f64,
    pub energy_fraction: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { cases: 5, flat_lambda: 0.5, flat_grid: 16, curved_grid: 8, band: 2, base_band: 1, tolerance: 1e-5, energy_fraction: 0.999 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub lambda: f64,
    /// Chart components `(q₁₁, q₁₂, q₂₂)` of the perturbing tensor.
    pub q_amplitude: [f64; 3],
    pub q_frequency: i32,
    pub q_radius: f64,
    pub s_values: Vec<f64>,
    pub trajectories: usize,
    pub length: f64,
    pub burn_in: f64,
    pub samples: usize,
    pub t_max: f64,
    pub dt: f64,
    pub coboundary_samples: usize,
    pub coboundary_t_max: f64,
    pub relative_tolerance: f64,
    pub hyperbolicity_starts: usize,
    pub hyperbolicity_time: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            q_amplitude: [12.0, 7.2, -12.0],
            q_frequency: 1,
            q_radius: 0.6,
            s_values: vec![-0.04, -0.02, 0.0, 0.02, 0.04],
            trajectories: 8,
            length: 1e4,
            burn_in: 20.0,
            samples: 10_000,
            t_max: 40.0,
            dt: 0.1,
            coboundary_samples: 1000,
            coboundary_t_max: 20.0,
            relative_tolerance: 0.2,
            hyperbolicity_starts: 2,
            hyperbolicity_time: 100.0,
        }
    }
}

fn positive(name: &str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} out of range")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed, so larger seeds could not be recorded
        positive("seed", self.seed <= i64::MAX as u64)?;
        let s = &self.surface;
        positive("surface.torus_grid", s.torus_grid >= 8 && s.torus_grid.is_multiple_of(2))?;
        positive("surface.bolza_grid", s.bolza_grid >= 8 && s.bolza_grid.is_multiple_of(2))?;
        positive("surface.band_limit", s.band_limit >= 4)?;
        positive("surface.bolza_lambdas", s.bolza_lambdas.iter().all(|l| l.is_finite()))?;
        s.torus()?;
        positive("frame.samples", self.frame.samples > 0)?;
        positive("frame.max_degree", self.frame.max_degree + 2 <= s.band_limit)?;
        positive("pestov.samples", self.pestov.samples > 0)?;
        positive("pestov.max_degree", self.pestov.max_degree + 2 <= s.band_limit)?;
        let a = &self.alpha;
        positive("alpha.samples", a.samples > 0)?;
        positive("alpha.max_degree", a.max_degree < s.band_limit)?;
        positive("alpha.control_grid", a.control_grid >= 8 && a.control_grid.is_multiple_of(2))?;
        positive("alpha.gap_degree", a.gap_degree >= 1)?;
        positive("alpha.gap_max_degree", a.gap_max_degree >= a.gap_degree as usize && a.gap_max_degree + 2 <= s.band_limit)?;
        let o = &self.orbits;
        positive("orbits.max_word_length", (1..=6).contains(&o.max_word_length))?;
        positive("orbits.continuation_steps", o.continuation_steps >= 1)?;
        positive("orbits.rtol", o.rtol > 0.0 && o.rtol < 1e-3)?;
        let r = &self.riccati;
        positive("riccati.starts", r.starts >= 1)?;
        positive("riccati.length", r.length > 0.0 && r.lyapunov_time > 0.0)?;
        let y = &self.ray;
        positive("ray.fields", y.fields >= 1)?;
        positive("ray.grid", y.grid >= 8 && y.grid.is_multiple_of(2))?;
        positive("ray.rtol", y.rtol > 0.0 && y.panel_tolerance > 0.0)?;
        let t = &self.transport;
        positive("transport.cases", t.cases >= 1)?;
        positive("transport.flat_grid", t.flat_grid >= 4 && t.flat_grid.is_multiple_of(2))?;
        positive("transport.curved_grid", t.curved_grid >= 4 && t.curved_grid.is_multiple_of(2))?;
        positive("transport.band", t.band >= 1)?;
        positive("transport.base_band", t.base_band >= 0 && 2 * t.base_band < t.flat_grid.min(t.curved_grid) as i32)?;
        let e = &self.entropy;
        positive("entropy.s_values", e.s_values.iter().all(|s| s.is_finite()))?;
        positive("entropy.trajectories", e.trajectories >= 2)?;
        positive("entropy.length", e.length > 0.0 && e.burn_in >= 0.0)?;
        positive("entropy.samples", e.samples >= 2 && e.coboundary_samples >= 2)?;
        positive("entropy.t_max", e.t_max >= e.dt && e.dt > 0.0 && e.coboundary_t_max >= e.dt)?;
        positive("entropy.q_radius", e.q_radius > 0.0)?;
        positive("entropy.hyperbolicity", e.hyperbolicity_starts >= 1 && e.hyperbolicity_time > 0.0)?;
        Ok(())
    }
}
