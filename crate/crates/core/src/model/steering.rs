//! Antenna-, frequency- and delay-domain steering vectors.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::geometry::{centered, ArrayGeometry, SubcarrierGrid};
use super::path::PathParams;

/// How per-antenna distance variations enter the antenna-domain steering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteeringMode {
    /// Exact spherical-wave distances.
    #[default]
    Exact,
    /// Second-order Fresnel approximation.
    Approx,
}

impl PathParams {
    /// `Δd_n` for the 0-based antenna under the given mode.
    pub fn antenna_variation(&self, n0: usize, geom: &ArrayGeometry, mode: SteeringMode) -> f64 {
        match mode {
            SteeringMode::Exact => self.antenna_distance(n0, geom) - self.distance_m,
            SteeringMode::Approx => self.antenna_variation_approx(n0, geom),
        }
    }
}

fn carrier_phase(geom: &ArrayGeometry, variation: f64) -> Complex64 {
    Complex64::from_polar(
        1.0,
        2.0 * PI / geom.speed_of_light() * geom.carrier_hz() * variation,
    )
}

/// Full-array near-field steering vector `w(θ, d)`.
pub fn near_field_steering(
    path: &PathParams,
    geom: &ArrayGeometry,
    mode: SteeringMode,
) -> Array1<Complex64> {
    Array1::from_shape_fn(geom.num_antennas(), |n| {
        carrier_phase(geom, path.antenna_variation(n, geom, mode))
    })
}

/// Rows of `w(θ, d)` belonging to the 0-based subarray `k0`.
pub fn subarray_steering(
    path: &PathParams,
    k0: usize,
    geom: &ArrayGeometry,
    mode: SteeringMode,
) -> Array1<Complex64> {
    let ns = geom.antennas_per_subarray();
    Array1::from_shape_fn(ns, |i| {
        carrier_phase(geom, path.antenna_variation(k0 * ns + i, geom, mode))
    })
}

/// Frequency-domain steering `p(d, r)`: entry `m` is
/// `exp(j 2π δ_{M,m} Δf (r + d) / c)`.
pub fn freq_steering(d_arg: f64, r_arg: f64, grid: &SubcarrierGrid, c: f64) -> Array1<Complex64> {
    delay_steering(
        grid.normalized_delay(r_arg + d_arg, c),
        grid.num_subcarriers(),
    )
}

/// Delay-domain steering `b(τ)`: entry `m` is `exp(j 2π δ_{M,m} τ)`.
pub fn delay_steering(tau: f64, num_subcarriers: usize) -> Array1<Complex64> {
    Array1::from_shape_fn(num_subcarriers, |m| {
        Complex64::from_polar(1.0, 2.0 * PI * centered(m, num_subcarriers) * tau)
    })
}

/// Near-field beam squint matrix `Q_wn(θ, d)` with exact distance variations.
pub fn beam_squint_matrix_full(
    path: &PathParams,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Array2<Complex64> {
    let c = geom.speed_of_light();
    let mut q = Array2::zeros((geom.num_antennas(), grid.num_subcarriers()));
    for (n, mut row) in q.rows_mut().into_iter().enumerate() {
        let dv = path.antenna_variation(n, geom, SteeringMode::Exact);
        row.assign(&freq_steering(dv, 0.0, grid, c));
    }
    q
}
