//! Per-LPU gain fitting and residual cancellation.

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frontend::AnalogCombiner;
use crate::model::{
    freq_steering, subarray_steering, ArrayGeometry, PathParams, SteeringMode, SubcarrierGrid,
};

/// Unit-gain path carrying the decoupled geometry.
pub fn geometry_only(angle_sine: f64, distance_m: f64, range_m: f64) -> PathParams {
    PathParams::new(Complex64::new(1.0, 0.0), angle_sine, distance_m, range_m)
}

/// `v = (f_kᴴ w_k(θ̂, d̂)) · p(d̃̂_k, r̂)`: the noiseless row a unit composite
/// gain would produce at subarray `k0`.
pub fn gain_regressor(
    k0: usize,
    estimate: &PathParams,
    comb: &AnalogCombiner,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    mode: SteeringMode,
) -> Array1<Complex64> {
    regressor_for(k0, estimate, comb.weights().row(k0), geom, grid, mode)
}

/// [`gain_regressor`] from the subarray's own phase-shift vector `f_k`.
pub fn regressor_for(
    k0: usize,
    estimate: &PathParams,
    f: ArrayView1<'_, Complex64>,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    mode: SteeringMode,
) -> Array1<Complex64> {
    let w = subarray_steering(estimate, k0, geom, mode);
    let beam: Complex64 = f.iter().zip(w.iter()).map(|(a, x)| a.conj() * x).sum();
    let (_, dk) = estimate.subarray_observed(k0, geom);
    freq_steering(dk, estimate.range_m, grid, geom.speed_of_light()).mapv(|p| p * beam)
}

/// Least-squares gain `vᴴ y / (√P ‖v‖²)`.
pub fn estimate_gain_lpu(
    row: &[Complex64],
    regressor: &Array1<Complex64>,
    power: f64,
    k0: usize,
) -> Result<Complex64> {
    let norm2: f64 = regressor.iter().map(|v| v.norm_sqr()).sum();
    if norm2 == 0.0 || power <= 0.0 {
        return Err(Error::OrthogonalCombiner(k0));
    }
    let corr: Complex64 = regressor.iter().zip(row).map(|(v, y)| v.conj() * y).sum();
    Ok(corr / (power.sqrt() * norm2))
}

/// `y ← y - √P ρ̂_k v`.
pub fn residual_update(
    row: &mut [Complex64],
    gain: Complex64,
    regressor: &Array1<Complex64>,
    power: f64,
) {
    let a = gain * power.sqrt();
    for (y, v) in row.iter_mut().zip(regressor) {
        *y -= a * v;
    }
}
