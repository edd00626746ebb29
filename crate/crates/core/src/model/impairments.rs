//! Per-LPU clock offsets and gain mismatches.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::geometry::SubcarrierGrid;
use crate::error::{Error, Result};

/// Clock offsets are in normalised delay units (fractions of `1/Δf`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impairments {
    pub clock_offsets: Vec<f64>,
    pub gain_factors: Vec<f64>,
}

impl Impairments {
    pub fn none(num_subarrays: usize) -> Self {
        Self {
            clock_offsets: vec![0.0; num_subarrays],
            gain_factors: vec![1.0; num_subarrays],
        }
    }

    pub fn validate(&self, num_subarrays: usize) -> Result<()> {
        if self.clock_offsets.len() != num_subarrays || self.gain_factors.len() != num_subarrays {
            return Err(Error::Shape {
                expected: format!("{num_subarrays} offsets and gain factors"),
                actual: format!(
                    "{} and {}",
                    self.clock_offsets.len(),
                    self.gain_factors.len()
                ),
            });
        }
        if let Some(p) = self
            .gain_factors
            .iter()
            .find(|p| !(**p > 0.0 && p.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "gain factor {p} must be positive"
            )));
        }
        if self.clock_offsets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "clock offsets must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Applies `y_k ← P_k e^{j 2π f_c T'_k} (y_k ⊙ b(T_k))` to every row, with
/// `T'_k = T_k / Δf` the offset in seconds.
pub fn apply_impairments(
    rows: &Array2<Complex64>,
    imp: &Impairments,
    carrier_hz: f64,
    grid: &SubcarrierGrid,
) -> Result<Array2<Complex64>> {
    imp.validate(rows.nrows())?;
    if rows.ncols() != grid.num_subcarriers() {
        return Err(Error::Shape {
            expected: format!("{} columns", grid.num_subcarriers()),
            actual: format!("{}", rows.ncols()),
        });
    }
    let mut out = rows.clone();
    for (k, mut row) in out.rows_mut().into_iter().enumerate() {
        let t = imp.clock_offsets[k];
        let seconds = t / grid.spacing_hz();
        let common =
            imp.gain_factors[k] * Complex64::from_polar(1.0, 2.0 * PI * carrier_hz * seconds);
        for (m, v) in row.iter_mut().enumerate() {
            *v *= common * Complex64::from_polar(1.0, 2.0 * PI * grid.subcarrier_offset(m) * t);
        }
    }
    Ok(out)
}
