//! Uniform planar array delay model.

use serde::{Deserialize, Serialize};

use super::geometry::{centered, SubcarrierGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    rows: usize,
    cols: usize,
    spacing_m: f64,
    carrier_hz: f64,
}

/// Path seen by a planar array: direction cosines `α` (x-axis) and `β`
/// (y-axis), distance and range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaPath {
    pub alpha: f64,
    pub beta: f64,
    pub distance_m: f64,
    pub range_m: f64,
}

impl UpaGeometry {
    pub fn new(rows: usize, cols: usize, spacing_m: f64, carrier_hz: f64) -> Result<Self> {
        if rows == 0 || cols == 0 || rows % 2 != 0 || cols % 2 != 0 {
            return Err(Error::Geometry(format!(
                "UPA dimensions {rows}x{cols} must be positive and even"
            )));
        }
        if !(spacing_m > 0.0 && carrier_hz > 0.0) {
            return Err(Error::Geometry(
                "spacing and carrier must be positive".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            spacing_m,
            carrier_hz,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_m
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn row_offset(&self, r0: usize) -> f64 {
        centered(r0, self.rows)
    }

    pub fn col_offset(&self, c0: usize) -> f64 {
        centered(c0, self.cols)
    }
}

/// Fresnel-approximate `η(n_r, n_c) = r + d_{n_r,n_c}` in metres for 0-based
/// element indices.
pub fn upa_per_antenna_delay(path: &UpaPath, upa: &UpaGeometry, r0: usize, c0: usize) -> f64 {
    let s = upa.spacing();
    let (x, y) = (upa.row_offset(r0) * s, upa.col_offset(c0) * s);
    let d = path.distance_m;
    path.range_m + d - x * path.alpha + x * x * (1.0 - path.alpha * path.alpha) / (2.0 * d)
        - y * path.beta
        + y * y * (1.0 - path.beta * path.beta) / (2.0 * d)
}

/// Full `N_r × N_c` map of [`upa_per_antenna_delay`], row-major.
pub fn upa_delay_map(path: &UpaPath, upa: &UpaGeometry) -> Vec<Vec<f64>> {
    (0..upa.rows())
        .map(|r| {
            (0..upa.cols())
                .map(|c| upa_per_antenna_delay(path, upa, r, c))
                .collect()
        })
        .collect()
}

/// Normalised form of [`upa_delay_map`] for a given subcarrier grid.
pub fn upa_normalized_delays(
    path: &UpaPath,
    upa: &UpaGeometry,
    grid: &SubcarrierGrid,
    c: f64,
) -> Vec<Vec<f64>> {
    upa_delay_map(path, upa)
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|eta| grid.normalized_delay(eta, c))
                .collect()
        })
        .collect()
}
