//! Single-path Fisher information, Cramér–Rao bounds, distributed lower
//! bounds and the delay-domain resolution predicate.
//!
//! Parameter order everywhere is `(θ, d, r)`. All bounds assume the optimal
//! per-subarray combiner, under which the subarray observation reduces to
//! `g √N_s p(d − d̃_k, r − d)`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ArrayGeometry, PathParams, SubcarrierGrid};

/// `Σ_k δ_{K,k}²` over all `K` centred offsets.
pub fn offset_sum_sq(k: usize) -> f64 {
    let k = k as f64;
    k * (k * k - 1.0) / 12.0
}

/// `Σ_k δ_{K,k}⁴` over all `K` centred offsets.
pub fn offset_sum_quartic(k: usize) -> f64 {
    let k = k as f64;
    k * (k * k - 1.0) * (3.0 * k * k - 7.0) / 240.0
}

/// `Σ_{k ≤ K/2} δ_{K,k}²`, the half-array sum used by the distributed bounds.
pub fn half_offset_sum_sq(k: usize) -> f64 {
    let k = k as f64;
    k * (k * k - 1.0) / 24.0
}

/// Derivatives of the subarray-centre distance `r + d + Δd̃_k` with respect
/// to `(θ, d, r)` under the second-order model.
pub fn derivative_coefficients(path: &PathParams, k0: usize, geom: &ArrayGeometry) -> [f64; 3] {
    let t = path.angle_sine;
    let d = path.distance_m;
    let x = geom.subarray_offset(k0) * geom.subarray_pitch();
    [
        -x - x * x * t / d,
        1.0 - x * x * (1.0 - t * t) / (2.0 * d * d),
        1.0,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimReport {
    pub u_dh: Matrix3<f64>,
    pub fim: Matrix3<f64>,
    /// `2π² P |g|² N_s M (M² − 1) Δf² / (3 c² σ²)`.
    pub scale: f64,
}

fn check_scenario(path: &PathParams, power: f64, noise_variance: f64) -> Result<()> {
    if !(path.angle_sine.abs() < 1.0) || !(path.distance_m > 0.0 && path.distance_m.is_finite()) {
        return Err(Error::Path(format!(
            "bounds need |θ| < 1 and d > 0, got θ={} d={}",
            path.angle_sine, path.distance_m
        )));
    }
    if !(power > 0.0 && power.is_finite()) || !(noise_variance > 0.0 && noise_variance.is_finite())
    {
        return Err(Error::InvalidArgument(
            "power and noise variance must be positive".into(),
        ));
    }
    if path.gain.norm_sqr() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(())
}

/// `c² σ² / (π² P |g|²)`, the prefactor shared by every closed form.
fn prefactor(path: &PathParams, geom: &ArrayGeometry, power: f64, noise_variance: f64) -> f64 {
    let c = geom.speed_of_light();
    c * c * noise_variance / (PI * PI * power * path.gain.norm_sqr())
}

pub fn fim_numeric(
    path: &PathParams,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    power: f64,
    noise_variance: f64,
) -> Result<FimReport> {
    check_scenario(path, power, noise_variance)?;
    let mut u_dh = Matrix3::zeros();
    for k0 in 0..geom.num_subarrays() {
        let rho = derivative_coefficients(path, k0, geom);
        for i in 0..3 {
            for j in 0..3 {
                u_dh[(i, j)] += rho[i] * rho[j];
            }
        }
    }
    let m = grid.num_subcarriers() as f64;
    let df = grid.spacing_hz();
    let c = geom.speed_of_light();
    let scale = 2.0
        * PI
        * PI
        * power
        * path.gain.norm_sqr()
        * geom.antennas_per_subarray() as f64
        * m
        * (m * m - 1.0)
        * df
        * df
        / (3.0 * c * c * noise_variance);
    Ok(FimReport {
        u_dh,
        fim: u_dh * scale,
        scale,
    })
}

/// Diagonal of `FIM⁻¹`.
pub fn crlb_numeric(report: &FimReport) -> Result<[f64; 3]> {
    // Invert the unscaled matrix; its entries are O(1)..O(K³) rather than
    // carrying the ~1e20 scale factor.
    let inv = report.u_dh.try_inverse().ok_or(Error::SingularFim)?;
    let out = [inv[(0, 0)], inv[(1, 1)], inv[(2, 2)]].map(|v| v / report.scale);
    if out.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::SingularFim);
    }
    Ok(out)
}

/// Large-`K`, large-`M` closed forms for `(θ_CB, d_CB, r_CB)`.
pub fn crlb_closed_form(
    path: &PathParams,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    power: f64,
    noise_variance: f64,
) -> Result<[f64; 3]> {
    check_scenario(path, power, noise_variance)?;
    let pre = prefactor(path, geom, power, noise_variance);
    let t2 = path.angle_sine * path.angle_sine;
    let d = path.distance_m;
    let k = geom.num_subarrays() as f64;
    let ns = geom.antennas_per_subarray() as f64;
    let n = geom.num_antennas() as f64;
    let s = geom.spacing();
    let m3 = (grid.num_subcarriers() as f64).powi(3);
    let df2 = grid.spacing_hz().powi(2);
    let theta =
        pre * 36.0 * (1.0 - t2) / (k.powi(3) * ns.powi(3) * m3 * df2 * s * s * (2.0 + 7.0 * t2));
    let tail = k.powi(5) * ns.powi(5) * m3 * df2 * s.powi(4) * (1.0 - t2) * (2.0 + 7.0 * t2);
    let dist = pre * 144.0 * d * d * (15.0 * d * d + s * s * t2 * ns * ns * k * k) / tail;
    let range = pre
        * (8640.0 * d.powi(4)
            + s * s * d * d * n * n * (1296.0 * t2 - 720.0)
            + 27.0 * s.powi(4) * (1.0 - t2).powi(2) * n.powi(4))
        / (4.0 * tail);
    Ok([theta, dist, range])
}

/// Closed forms re-derived from the exact determinant
/// `det U_dh = K³ (K²−1)² (K²−4) s'⁶ (1−θ²)² / (8640 d⁴)`.
/// They differ from [`crlb_closed_form`] by the factor `(2+7θ²)/(2−2θ²)`
/// and agree at broadside.
pub fn crlb_closed_form_corrected(
    path: &PathParams,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    power: f64,
    noise_variance: f64,
) -> Result<[f64; 3]> {
    let printed = crlb_closed_form(path, geom, grid, power, noise_variance)?;
    let t2 = path.angle_sine * path.angle_sine;
    let fix = (2.0 + 7.0 * t2) / (2.0 * (1.0 - t2));
    Ok(printed.map(|v| v * fix))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBounds {
    /// Per-LPU delay CRLB in normalised delay units.
    pub tau_cb: f64,
    pub theta: f64,
    pub inv_distance: f64,
    /// `d⁴ · inv_distance`.
    pub distance: f64,
    pub range: f64,
}

/// Bounds for the distributed estimator, where each LPU only measures its
/// own delay and the CPU combines them linearly.
pub fn lb_closed_form(
    path: &PathParams,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    power: f64,
    noise_variance: f64,
) -> Result<LowerBounds> {
    check_scenario(path, power, noise_variance)?;
    let pre = prefactor(path, geom, power, noise_variance);
    let g2 = path.gain.norm_sqr();
    let t2 = path.angle_sine * path.angle_sine;
    let d = path.distance_m;
    let k = geom.num_subarrays() as f64;
    let ns = geom.antennas_per_subarray() as f64;
    let s = geom.spacing();
    let m = grid.num_subcarriers() as f64;
    let mm = m * (m * m - 1.0);
    let df2 = grid.spacing_hz().powi(2);
    let c = geom.speed_of_light();

    let tau_cb = 3.0 * noise_variance / (2.0 * PI * PI * power * ns * g2 * mm);
    let theta =
        c * c * tau_cb / (2.0 * ns * ns * s * s * df2 * half_offset_sum_sq(geom.num_subarrays()));
    let inv_distance = pre * 1152.0
        / (k.powi(3) * (k * k - 4.0) * ns.powi(5) * mm * df2 * s.powi(4) * (1.0 - t2).powi(2));
    let range = pre * 3.0 / (2.0 * k * ns * mm * df2);
    Ok(LowerBounds {
        tau_cb,
        theta,
        inv_distance,
        distance: d.powi(4) * inv_distance,
        range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub crlb_numeric: [f64; 3],
    pub crlb_closed_form: [f64; 3],
    pub crlb_corrected: [f64; 3],
    pub lower: LowerBounds,
}

pub fn bounds_report(
    path: &PathParams,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    power: f64,
    noise_variance: f64,
) -> Result<BoundsReport> {
    let fim = fim_numeric(path, geom, grid, power, noise_variance)?;
    Ok(BoundsReport {
        crlb_numeric: crlb_numeric(&fim)?,
        crlb_closed_form: crlb_closed_form(path, geom, grid, power, noise_variance)?,
        crlb_corrected: crlb_closed_form_corrected(path, geom, grid, power, noise_variance)?,
        lower: lb_closed_form(path, geom, grid, power, noise_variance)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub resolvable: bool,
    /// `|Δ(r + d)|` divided by the threshold `c / (M Δf)`.
    pub margin: f64,
}

/// Whether two paths fall into distinct delay bins at the central subarray.
/// Only `r + d` enters; paths separated purely in angle are unresolvable.
pub fn resolution_predicate(
    a: &PathParams,
    b: &PathParams,
    grid: &SubcarrierGrid,
    c: f64,
) -> Resolution {
    let gap = (a.range_m + a.distance_m - b.range_m - b.distance_m).abs();
    let margin = gap / grid.delay_resolution_m(c);
    Resolution {
        // Absorb the rounding of r + d so an exact one-cell gap counts.
        resolvable: margin >= 1.0 - 1e-12,
        margin,
    }
}
