//! JSON persistence of fiber functions. Floats are written with shortest
//! round-trip formatting, so reading back reproduces every bit.

use super::function::FiberFunction;
use super::grid::{BaseGrid, PhaseGrid};
use crate::error::{Error, Result};
use crate::geometry::SurfaceModel;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub k: i32,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberFunctionRecord {
    pub model: SurfaceModel,
    pub grid: BaseGrid,
    pub band_limit: usize,
    pub kmax: usize,
    pub offset: [f64; 2],
    pub leakage: f64,
    pub modes: Vec<ModeRecord>,
}

impl FiberFunction {
    pub fn to_record(&self) -> FiberFunctionRecord {
        FiberFunctionRecord {
            model: self.grid.model(),
            grid: *self.grid.base(),
            band_limit: self.band_limit(),
            kmax: self.kmax,
            offset: [self.offset.re, self.offset.im],
            leakage: self.leakage,
            modes: self
                .degrees()
                .map(|k| {
                    let m = self.mode(k).unwrap();
                    ModeRecord { k, re: m.iter().map(|v| v.re).collect(), im: m.iter().map(|v| v.im).collect() }
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    /// Rebuild on a grid that matches the record's discretisation.
    pub fn from_record(grid: &Arc<PhaseGrid>, rec: &FiberFunctionRecord) -> Result<Self> {
        if rec.model != grid.model() || rec.grid != *grid.base() || rec.band_limit != grid.band_limit() {
            return Err(Error::GridMismatch);
        }
        let mut u = FiberFunction::zeros(grid, rec.kmax)?;
        for m in &rec.modes {
            if m.re.len() != grid.base().len() || m.im.len() != m.re.len() || m.k.unsigned_abs() as usize > rec.kmax {
                return Err(Error::Precondition(format!("malformed record for degree {}", m.k)));
            }
            for (d, (r, i)) in u.mode_mut(m.k).iter_mut().zip(m.re.iter().zip(&m.im)) {
                *d = C::new(*r, *i);
            }
        }
        u.offset = C::new(rec.offset[0], rec.offset[1]);
        u.leakage = rec.leakage;
        Ok(u)
    }

    pub fn from_json(grid: &Arc<PhaseGrid>, s: &str) -> Result<Self> {
        let rec: FiberFunctionRecord = serde_json::from_str(s)?;
        Self::from_record(grid, &rec)
    }
}
