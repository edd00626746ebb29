//! Per-path parameters and the near-field distance geometry.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::geometry::{ArrayGeometry, SubcarrierGrid};
use crate::error::{Error, Result};

/// One propagation path: complex gain `g`, angle sine `θ`, scatterer-to-array
/// distance `d` and UE-to-scatterer range `r` (zero for line of sight).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub gain: Complex64,
    pub angle_sine: f64,
    pub distance_m: f64,
    pub range_m: f64,
}

/// Distance from a point at `(d, θ)` to an element displaced by `x` metres
/// along the array axis.
#[inline]
pub fn distance_at(distance: f64, angle_sine: f64, x: f64) -> f64 {
    (distance * distance - 2.0 * distance * x * angle_sine + x * x).sqrt()
}

/// Second-order (Fresnel) distance variation for a displacement `x`.
#[inline]
pub fn fresnel_variation(distance: f64, angle_sine: f64, x: f64) -> f64 {
    -x * angle_sine + x * x * (1.0 - angle_sine * angle_sine) / (2.0 * distance)
}

impl PathParams {
    pub fn new(gain: Complex64, angle_sine: f64, distance_m: f64, range_m: f64) -> Self {
        Self {
            gain,
            angle_sine,
            distance_m,
            range_m,
        }
    }

    /// `ρ = g * exp(j 2π f_c (r + d) / c)`.
    pub fn composite_gain(&self, geom: &ArrayGeometry) -> Complex64 {
        let phase =
            2.0 * PI / geom.speed_of_light() * geom.carrier_hz() * (self.range_m + self.distance_m);
        self.gain * Complex64::from_polar(1.0, phase)
    }

    /// Exact distance to the 0-based antenna `n0`.
    pub fn antenna_distance(&self, n0: usize, geom: &ArrayGeometry) -> f64 {
        distance_at(
            self.distance_m,
            self.angle_sine,
            geom.antenna_offset(n0) * geom.spacing(),
        )
    }

    /// Fresnel-approximate `Δd_n` for the 0-based antenna `n0`.
    pub fn antenna_variation_approx(&self, n0: usize, geom: &ArrayGeometry) -> f64 {
        fresnel_variation(
            self.distance_m,
            self.angle_sine,
            geom.antenna_offset(n0) * geom.spacing(),
        )
    }

    /// Angle sine and distance seen from the centre of the 0-based subarray.
    pub fn subarray_observed(&self, k0: usize, geom: &ArrayGeometry) -> (f64, f64) {
        let x = geom.subarray_offset(k0) * geom.subarray_pitch();
        let dk = distance_at(self.distance_m, self.angle_sine, x);
        ((self.distance_m * self.angle_sine - x) / dk, dk)
    }

    /// Normalised delay `(Δf/c)(r + d_n)` seen by the 0-based antenna.
    pub fn antenna_delay(&self, n0: usize, geom: &ArrayGeometry, grid: &SubcarrierGrid) -> f64 {
        grid.normalized_delay(
            self.range_m + self.antenna_distance(n0, geom),
            geom.speed_of_light(),
        )
    }

    /// Checks the parameter ranges synthesis and estimation rely on,
    /// including that every per-antenna delay lies in `(0, 1)`.
    pub fn validate(&self, geom: &ArrayGeometry, grid: &SubcarrierGrid) -> Result<()> {
        if !(self.angle_sine.abs() < 1.0) {
            return Err(Error::Path(format!(
                "angle sine {} outside (-1, 1)",
                self.angle_sine
            )));
        }
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::Path(format!(
                "distance {} must be positive",
                self.distance_m
            )));
        }
        if !(self.range_m >= 0.0 && self.range_m.is_finite()) {
            return Err(Error::Path(format!(
                "range {} must be non-negative",
                self.range_m
            )));
        }
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::Path("gain must be finite".into()));
        }
        // d_n is convex along the array, so its extremes are at the edges or
        // at the foot of the perpendicular.
        let n = geom.num_antennas();
        let mut lo = self
            .antenna_delay(0, geom, grid)
            .min(self.antenna_delay(n - 1, geom, grid));
        let mut hi = self
            .antenna_delay(0, geom, grid)
            .max(self.antenna_delay(n - 1, geom, grid));
        let foot = self.distance_m * self.angle_sine;
        if foot.abs() <= geom.max_antenna_displacement() {
            let dmin = self.distance_m * (1.0 - self.angle_sine * self.angle_sine).sqrt();
            let t = grid.normalized_delay(self.range_m + dmin, geom.speed_of_light());
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if !(lo > 0.0 && hi < 1.0) {
            return Err(Error::Path(format!(
                "per-antenna delays span [{lo}, {hi}], outside the unambiguous range (0, 1)"
            )));
        }
        Ok(())
    }
}

/// Exact scatterer-to-antenna distance for the 1-based antenna index.
pub fn scatterer_antenna_distance(
    path: &PathParams,
    n: usize,
    geom: &ArrayGeometry,
) -> Result<f64> {
    check_index(n, geom.num_antennas())?;
    Ok(path.antenna_distance(n - 1, geom))
}

/// Fresnel-approximate distance variation for the 1-based antenna index.
pub fn distance_variation_approx(path: &PathParams, n: usize, geom: &ArrayGeometry) -> Result<f64> {
    check_index(n, geom.num_antennas())?;
    Ok(path.antenna_variation_approx(n - 1, geom))
}

/// `(θ̃_k, d̃_k)` for the 1-based subarray index.
pub fn subarray_observed_params(
    path: &PathParams,
    k: usize,
    geom: &ArrayGeometry,
) -> Result<(f64, f64)> {
    check_index(k, geom.num_subarrays())?;
    Ok(path.subarray_observed(k - 1, geom))
}

fn check_index(i: usize, total: usize) -> Result<()> {
    if i == 0 || i > total {
        Err(Error::IndexOutOfRange { index: i, total })
    } else {
        Ok(())
    }
}
