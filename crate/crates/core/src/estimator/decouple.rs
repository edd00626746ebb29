//! Linear decoupling of angle, distance and range from per-subarray delays.
//!
//! With `η(k) = (c/Δf) τ_k = r + d - δ_k s' θ + δ_k² s'² (1 - θ²) / (2d)`
//! and `s' = N_s s`, mirrored pairs isolate `θ`, half-shifted pairs isolate
//! `d` once `θ` is known, and mirrored sums give `r`.

use crate::error::{Error, Result};
use crate::model::geometry::centered;
use crate::model::{ArrayGeometry, SubcarrierGrid};

/// Largest admissible `|θ̂|` after clamping.
pub const ANGLE_LIMIT: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    pub value: f64,
    /// The raw LS value fell outside `(-1, 1)`.
    pub clamped: bool,
    /// Every mirrored difference was zero.
    pub degenerate: bool,
}

fn check_delays(delays: &[f64], geom: &ArrayGeometry) -> Result<usize> {
    geom.ensure_even_subarrays()?;
    let k = geom.num_subarrays();
    if delays.len() != k {
        return Err(Error::Shape {
            expected: format!("{k} subarray delays"),
            actual: format!("{}", delays.len()),
        });
    }
    Ok(k)
}

/// `θ̂ = c / (2 s' Δf) · Σ δ_k (τ_{K-1-k} - τ_k) / Σ δ_k²` over the first half.
pub fn decouple_angle(
    delays: &[f64],
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Result<AngleEstimate> {
    let k = check_delays(delays, geom)?;
    let (mut num, mut den, mut all_zero) = (0.0, 0.0, true);
    for i in 0..k / 2 {
        let delta = centered(i, k);
        let diff = delays[k - 1 - i] - delays[i];
        all_zero &= diff == 0.0;
        num += delta * diff;
        den += delta * delta;
    }
    if all_zero {
        return Ok(AngleEstimate {
            value: 0.0,
            clamped: false,
            degenerate: true,
        });
    }
    let raw = geom.speed_of_light() / (2.0 * geom.subarray_pitch() * grid.spacing_hz()) * num / den;
    let clamped = !(raw.abs() < ANGLE_LIMIT);
    let value = if clamped {
        ANGLE_LIMIT.copysign(raw)
    } else {
        raw
    };
    Ok(AngleEstimate {
        value,
        clamped,
        degenerate: false,
    })
}

/// LS fit of `d v_k = (K s'² (1 - θ²) / 2)(δ_k + K/4)` with
/// `v_k = (c/Δf)(τ_{K/2+k} - τ_k) + (K/2) s' θ`.
pub fn decouple_distance(
    delays: &[f64],
    angle: f64,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Result<f64> {
    let k = check_delays(delays, geom)?;
    let sp = geom.subarray_pitch();
    let scale = geom.speed_of_light() / grid.spacing_hz();
    let half = k as f64 / 2.0;
    let (mut vq, mut vv, mut vmax) = (0.0, 0.0, 0.0f64);
    for i in 0..k / 2 {
        let v = scale * (delays[k / 2 + i] - delays[i]) + half * sp * angle;
        let q = centered(i, k) + k as f64 / 4.0;
        vq += v * q;
        vv += v * v;
        vmax = vmax.max(v.abs());
    }
    // Curvature terms below ~1e-12 of the aperture are rounding noise.
    if vmax <= 1e-12 * half * sp {
        return Err(Error::DistanceUnidentifiable);
    }
    Ok(k as f64 * sp * sp * (1.0 - angle * angle) / 2.0 * vq / vv)
}

/// `r̂ = mean_k ½[(c/Δf)(τ_{K-1-k} + τ_k) - δ_k² s'² (1 - θ̂²) / d̂] - d̂`.
pub fn decouple_range(
    delays: &[f64],
    angle: f64,
    distance: f64,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Result<f64> {
    let k = check_delays(delays, geom)?;
    let sp2 = geom.subarray_pitch().powi(2);
    let scale = geom.speed_of_light() / grid.spacing_hz();
    let mut acc = 0.0;
    for i in 0..k / 2 {
        let delta = centered(i, k);
        acc += 0.5
            * (scale * (delays[k - 1 - i] + delays[i])
                - delta * delta * sp2 * (1.0 - angle * angle) / distance);
    }
    Ok(acc / (k / 2) as f64 - distance)
}
