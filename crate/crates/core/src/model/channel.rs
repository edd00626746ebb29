//! Wideband near-field channel synthesis and binary dumps.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{Read, Write};

use super::geometry::{ArrayGeometry, SubcarrierGrid};
use super::path::PathParams;
use super::steering::{subarray_steering, SteeringMode};
use crate::error::{Error, Result};

/// `N × M` antenna-by-subcarrier channel with the geometry it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct WidebandChannel {
    pub entries: Array2<Complex64>,
    pub geometry: ArrayGeometry,
    pub grid: SubcarrierGrid,
}

impl WidebandChannel {
    pub fn zeros(geometry: ArrayGeometry, grid: SubcarrierGrid) -> Self {
        Self {
            entries: Array2::zeros((geometry.num_antennas(), grid.num_subcarriers())),
            geometry,
            grid,
        }
    }

    pub fn from_entries(
        entries: Array2<Complex64>,
        geometry: ArrayGeometry,
        grid: SubcarrierGrid,
    ) -> Result<Self> {
        let want = (geometry.num_antennas(), grid.num_subcarriers());
        if entries.dim() != want {
            return Err(Error::Shape {
                expected: format!("{want:?}"),
                actual: format!("{:?}", entries.dim()),
            });
        }
        if entries
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "channel entries must be finite".into(),
            ));
        }
        Ok(Self {
            entries,
            geometry,
            grid,
        })
    }

    /// Rows of the 0-based subarray `k0`, i.e. `H_k`.
    pub fn subarray_block(&self, k0: usize) -> ArrayView2<'_, Complex64> {
        let ns = self.geometry.antennas_per_subarray();
        self.entries.slice(s![k0 * ns..(k0 + 1) * ns, ..])
    }

    pub fn energy(&self) -> f64 {
        self.entries.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Channel from the full per-antenna model: antenna `n` of path `l` sees
/// `ρ_l w_n exp(j 2π δ_{M,m} Δf (r_l + d_{n,l}) / c)` with `w_n` built
/// according to `mode` and the squint term from exact distances.
pub fn synthesize_channel(
    paths: &[PathParams],
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    mode: SteeringMode,
) -> WidebandChannel {
    let mut h = WidebandChannel::zeros(*geom, *grid);
    let c = geom.speed_of_light();
    let kc = 2.0 * PI * geom.carrier_hz() / c;
    for path in paths {
        let rho = path.composite_gain(geom);
        for (n, mut row) in h.entries.rows_mut().into_iter().enumerate() {
            let amp = rho * Complex64::from_polar(1.0, kc * path.antenna_variation(n, geom, mode));
            let tau = grid.normalized_delay(path.range_m + path.antenna_distance(n, geom), c);
            add_delay_row(row.as_slice_mut().expect("row-major"), amp, tau);
        }
    }
    h
}

/// Ground-truth channel with exact spherical-wave phases.
pub fn synthesize_channel_exact(
    paths: &[PathParams],
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> WidebandChannel {
    synthesize_channel(paths, geom, grid, SteeringMode::Exact)
}

/// Channel under the subarray approximation: squint is evaluated once per
/// subarray at its centre, `H_k = ρ (w_k pᵀ(d, r)) ⊙ (pᵀ(d̃_k, -d) ⊗ 1)`.
pub fn synthesize_channel_subarray_approx(
    paths: &[PathParams],
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    mode: SteeringMode,
) -> WidebandChannel {
    let mut h = WidebandChannel::zeros(*geom, *grid);
    let ns = geom.antennas_per_subarray();
    for path in paths {
        let rho = path.composite_gain(geom);
        for k in 0..geom.num_subarrays() {
            let (_, dk) = path.subarray_observed(k, geom);
            let tau = grid.normalized_delay(path.range_m + dk, geom.speed_of_light());
            let w = subarray_steering(path, k, geom, mode);
            for (i, wi) in w.iter().enumerate() {
                let mut row = h.entries.row_mut(k * ns + i);
                add_delay_row(row.as_slice_mut().expect("row-major"), rho * wi, tau);
            }
        }
    }
    h
}

/// `row[m] += amp * exp(j 2π δ_{M,m} τ)`.
pub(crate) fn add_delay_row(row: &mut [Complex64], amp: Complex64, tau: f64) {
    let m = row.len();
    let half = (m as f64 - 1.0) / 2.0;
    for (i, v) in row.iter_mut().enumerate() {
        *v += amp * Complex64::from_polar(1.0, 2.0 * PI * (i as f64 - half) * tau);
    }
}

/// Writes a complex matrix as row-major little-endian `(re, im)` f64 pairs.
pub fn write_complex_matrix<W: Write>(mut out: W, m: &ArrayView2<'_, Complex64>) -> Result<()> {
    let mut buf = Vec::with_capacity(m.len() * 16);
    for v in m.iter() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a `rows × cols` matrix written by [`write_complex_matrix`].
pub fn read_complex_matrix<R: Read>(
    mut input: R,
    rows: usize,
    cols: usize,
) -> Result<Array2<Complex64>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    if buf.len() != rows * cols * 16 {
        return Err(Error::Shape {
            expected: format!("{} bytes", rows * cols * 16),
            actual: format!("{} bytes", buf.len()),
        });
    }
    let vals: Vec<Complex64> = buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), vals).expect("length checked"))
}
