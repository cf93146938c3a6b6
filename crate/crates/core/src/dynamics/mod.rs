//! Magnetic flow integration, closed orbits, Riccati solutions and
//! hyperbolicity diagnostics.

pub mod flow;
pub mod lyapunov;
pub mod ode;
pub mod orbits;
pub mod riccati;

pub use flow::{liouville_defect, phase_distance, speed_drift, FlowField, Forcing, Segment, Trajectory};
pub use ode::{DenseStep, Tolerances};
pub use orbits::{
    close_orbit, continue_orbit, continue_table, enumerate_closed_geodesics, flat_torus_orbits, ClosedOrbit, OrbitOptions,
    OrbitRecord, OrbitSample, OrbitTable,
};
pub use riccati::{riccati_solve, RiccatiOptions, RiccatiPair};
pub use lyapunov::{hyperbolicity_report, lyapunov_spectrum, HyperbolicityOptions, HyperbolicitySummary, LyapunovEstimate, LyapunovOptions};
