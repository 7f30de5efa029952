use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point of a prediction curve at extrapolation step `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub m: usize,
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Per-`m` predictions with uncertainty bands, tagged by the producing method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCurve {
    method: String,
    pilot_size: usize,
    points: Vec<CurvePoint>,
}

impl PredictionCurve {
    /// Points must have strictly increasing `m` and non-negative `std`.
    pub fn new(method: impl Into<String>, pilot_size: usize, points: Vec<CurvePoint>) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| w[1].m <= w[0].m) {
            return Err(Error::invalid(format!(
                "curve points not strictly increasing in m ({} then {})",
                w[0].m, w[1].m
            )));
        }
        if let Some(p) = points.iter().find(|p| !(p.std >= 0.0)) {
            return Err(Error::invalid(format!("negative or NaN std at m = {}", p.m)));
        }
        Ok(Self {
            method: method.into(),
            pilot_size,
            points,
        })
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn pilot_size(&self) -> usize {
        self.pilot_size
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn at(&self, m: usize) -> Option<&CurvePoint> {
        self.points
            .binary_search_by_key(&m, |p| p.m)
            .ok()
            .map(|i| &self.points[i])
    }

    /// True when means never decrease with `m` (up to `tol` absolute slack).
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.points.windows(2).all(|w| w[1].mean + tol >= w[0].mean)
    }
}
