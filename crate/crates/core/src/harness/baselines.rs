//! Reference estimators: minimum-norm least squares and a polar-grid
//! orthogonal matching pursuit used when the delay track is flat.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimator::{
    gain_regressor, geometry_only, stopping_threshold, DelayDictionary, PathEstimate,
};
use crate::frontend::{AnalogCombiner, ReceivedSignal};
use crate::model::geometry::centered;
use crate::model::{
    subarray_steering, ArrayGeometry, SteeringMode, SubcarrierGrid, WidebandChannel,
};

/// `Ĥ = A† Y / √P`. `A` is block diagonal with one row per subarray, so
/// `A A^H` is diagonal and the pseudo-inverse is `f_k / ‖f_k‖²` per block.
pub fn ls_baseline(
    signal: &ReceivedSignal,
    comb: &AnalogCombiner,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Result<WidebandChannel> {
    let (k, m) = (geom.num_subarrays(), grid.num_subcarriers());
    if signal.rows.dim() != (k, m)
        || comb.num_subarrays() != k
        || comb.antennas_per_subarray() != geom.antennas_per_subarray()
    {
        return Err(Error::Shape {
            expected: format!(
                "{k}x{m} signal and {k}x{} combiner",
                geom.antennas_per_subarray()
            ),
            actual: format!("{:?} signal", signal.rows.dim()),
        });
    }
    if !(signal.power > 0.0) {
        return Err(Error::InvalidArgument(
            "transmit power must be positive".into(),
        ));
    }
    let ns = geom.antennas_per_subarray();
    let mut h = WidebandChannel::zeros(*geom, *grid);
    for k0 in 0..k {
        let f = comb.weights().row(k0);
        let norm2: f64 = f.iter().map(|v| v.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(Error::OrthogonalCombiner(k0));
        }
        let y = signal.rows.row(k0);
        for (i, fi) in f.iter().enumerate() {
            let a = fi / (norm2 * signal.power.sqrt());
            h.entries
                .row_mut(k0 * ns + i)
                .zip_mut_with(&y, |h, y| *h = a * y);
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmpConfig {
    /// Angle sines `(2i − (A−1)) / A`; odd counts include broadside.
    pub angle_points: usize,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    /// Distances spaced uniformly in `1/d`.
    pub distance_points: usize,
    pub max_paths: usize,
    /// Sub-cell steps used to refine the winning atom's delay.
    pub delay_refinement: usize,
    pub steering: SteeringMode,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            angle_points: 513,
            distance_min_m: 10.0,
            distance_max_m: 20.0,
            distance_points: 64,
            max_paths: 8,
            delay_refinement: 32,
            steering: SteeringMode::Exact,
        }
    }
}

impl OmpConfig {
    pub fn angles(&self) -> Vec<f64> {
        let a = self.angle_points;
        (0..a).map(|i| 2.0 * centered(i, a) / a as f64).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        let n = self.distance_points;
        if n == 1 {
            return vec![0.5 * (self.distance_min_m + self.distance_max_m)];
        }
        let (lo, hi) = (1.0 / self.distance_max_m, 1.0 / self.distance_min_m);
        (0..n)
            .map(|j| 1.0 / (hi - (hi - lo) * j as f64 / (n - 1) as f64))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.angle_points == 0 || self.distance_points == 0 {
            return Err(Error::EmptyDictionary);
        }
        if !(self.distance_min_m > 0.0 && self.distance_max_m >= self.distance_min_m) {
            return Err(Error::Config(format!(
                "omp distance range [{}, {}] m is invalid",
                self.distance_min_m, self.distance_max_m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutput {
    pub paths: Vec<PathEstimate>,
    /// Atoms correlated per iteration, `A × D` each.
    pub correlations: Vec<usize>,
    pub residual: Array2<Complex64>,
}

struct Atom {
    angle: f64,
    distance: f64,
    /// `f_kᴴ w_k(θ, d)`.
    beam: Vec<Complex64>,
    /// `(Δf/c)(d̃_k − d)`.
    shift: Vec<f64>,
    energy: f64,
}

fn build_atoms(
    comb: &AnalogCombiner,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    cfg: &OmpConfig,
) -> Vec<Atom> {
    let c = geom.speed_of_light();
    let distances = cfg.distances();
    let mut specs = Vec::with_capacity(cfg.angle_points * distances.len());
    for &angle in &cfg.angles() {
        for &distance in &distances {
            specs.push((angle, distance));
        }
    }
    specs
        .into_par_iter()
        .map(|(angle, distance)| {
            let p = geometry_only(angle, distance, 0.0);
            let mut beam = Vec::with_capacity(geom.num_subarrays());
            let mut shift = Vec::with_capacity(geom.num_subarrays());
            for k0 in 0..geom.num_subarrays() {
                beam.push(comb.project(k0, &subarray_steering(&p, k0, geom, cfg.steering)));
                let (_, dk) = p.subarray_observed(k0, geom);
                shift.push(grid.normalized_delay(dk - distance, c));
            }
            let energy = beam.iter().map(|b| b.norm_sqr()).sum();
            Atom {
                angle,
                distance,
                beam,
                shift,
                energy,
            }
        })
        .collect()
}

/// `z_m = Σ_k conj(a_k) y_k[m] e^{−j2π δ_m s_k}`: undoes the per-subarray
/// squint so that a matching path adds coherently at delay `(Δf/c)(r + d)`.
fn align(atom: &Atom, rows: &Array2<Complex64>) -> Vec<Complex64> {
    let m = rows.ncols();
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    const LANES: usize = 4;
    for (k0, row) in rows.rows().into_iter().enumerate() {
        let a = atom.beam[k0].conj();
        let s = atom.shift[k0];
        let row = row.as_slice().expect("row-major");
        // Independent recurrences; a single chain is latency-bound.
        let step = Complex64::from_polar(1.0, -2.0 * PI * s * LANES as f64);
        let mut rot: [Complex64; LANES] =
            std::array::from_fn(|l| a * Complex64::from_polar(1.0, -2.0 * PI * centered(l, m) * s));
        let mut zc = z.chunks_exact_mut(LANES);
        let mut yc = row.chunks_exact(LANES);
        for (zs, ys) in (&mut zc).zip(&mut yc) {
            for l in 0..LANES {
                zs[l] += rot[l] * ys[l];
                rot[l] *= step;
            }
        }
        for ((zm, y), r) in zc.into_remainder().iter_mut().zip(yc.remainder()).zip(rot) {
            *zm += r * y;
        }
    }
    z
}

/// Off-grid delay maximising `|b(τ)ᴴ z|²` within one cell of grid index `i`.
fn refine_delay(z: &[Complex64], i: usize, steps: usize) -> f64 {
    let m = z.len();
    let coarse = (i as f64 + 0.5) / m as f64;
    if steps == 0 {
        return coarse;
    }
    let mut best = (coarse, f64::NEG_INFINITY);
    let span = steps as i64;
    for s in -span..=span {
        let tau = coarse + s as f64 / (steps as f64 * m as f64);
        let corr: Complex64 = z
            .iter()
            .enumerate()
            .map(|(mi, v)| v * Complex64::from_polar(1.0, -2.0 * PI * centered(mi, m) * tau))
            .sum();
        if corr.norm_sqr() > best.1 {
            best = (tau, corr.norm_sqr());
        }
    }
    best.0
}

/// Greedy matching pursuit over a `(θ, d)` polar grid with a per-atom delay
/// scan, then a joint least-squares refit of all selected gains.
///
/// The dictionary sees the same single-pilot combined observation as the
/// distributed estimator; it is a stand-in for the wideband dictionary
/// methods, not a reimplementation of any particular one.
pub fn polar_omp(
    signal: &ReceivedSignal,
    comb: &AnalogCombiner,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    false_alarm_rate: f64,
    cfg: &OmpConfig,
) -> Result<OmpOutput> {
    cfg.validate()?;
    let (k, m) = (geom.num_subarrays(), grid.num_subcarriers());
    if signal.rows.dim() != (k, m) {
        return Err(Error::Shape {
            expected: format!("{k}x{m} received signal"),
            actual: format!("{:?}", signal.rows.dim()),
        });
    }
    let atoms = build_atoms(comb, geom, grid, cfg);
    let dict = DelayDictionary::new(m)?;
    let threshold = if signal.noise_variance > 0.0 && m * atoms.len() >= 2 {
        stopping_threshold(signal.noise_variance, m * atoms.len(), false_alarm_rate)?
    } else {
        0.0
    };
    let c = geom.speed_of_light();
    let sqrt_p = signal.power.sqrt();
    let y: Vec<Complex64> = signal.rows.iter().copied().collect();
    let floor = 1e-24 * y.iter().map(|v| v.norm_sqr()).sum::<f64>();

    let mut residual = signal.rows.clone();
    let mut chosen: Vec<(f64, f64, f64)> = Vec::new();
    let mut columns: Vec<Array1<Complex64>> = Vec::new();
    let mut correlations = Vec::new();
    let mut gains: Vec<Complex64> = Vec::new();

    while chosen.len() < cfg.max_paths {
        if residual.iter().map(|v| v.norm_sqr()).sum::<f64>() <= floor {
            break;
        }
        let scored: Vec<(f64, usize)> = atoms
            .par_iter()
            .map(|a| {
                if a.energy == 0.0 {
                    return (0.0, 0);
                }
                let det = dict.detect(&align(a, &residual));
                (det.score / a.energy, det.index)
            })
            .collect();
        correlations.push(atoms.len());
        let (best, &(score, index)) =
            scored
                .iter()
                .enumerate()
                .fold(
                    (0, &scored[0]),
                    |acc, (i, s)| if s.0 > acc.1 .0 { (i, s) } else { acc },
                );
        if score <= threshold {
            break;
        }
        let atom = &atoms[best];
        let tau = refine_delay(&align(atom, &residual), index, cfg.delay_refinement);
        let range = tau * c / grid.spacing_hz() - atom.distance;
        let est = geometry_only(atom.angle, atom.distance, range);
        let mut col = Array1::zeros(k * m);
        for k0 in 0..k {
            let v = gain_regressor(k0, &est, comb, geom, grid, cfg.steering);
            col.slice_mut(ndarray::s![k0 * m..(k0 + 1) * m]).assign(&v);
        }
        chosen.push((atom.angle, atom.distance, range));
        columns.push(col);

        // Joint refit on the original observation.
        let l = columns.len();
        let gram = DMatrix::from_fn(l, l, |i, j| {
            columns[i]
                .iter()
                .zip(columns[j].iter())
                .map(|(a, b)| a.conj() * b)
                .sum()
        });
        let rhs = DVector::from_fn(l, |i, _| {
            columns[i]
                .iter()
                .zip(&y)
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
        });
        let Some(sol) = gram.lu().solve(&rhs) else {
            chosen.pop();
            columns.pop();
            break;
        };
        gains = sol.iter().map(|g| g / sqrt_p).collect();
        let mut fit = Array1::<Complex64>::zeros(k * m);
        for (g, col) in gains.iter().zip(&columns) {
            fit.scaled_add(*g * sqrt_p, col);
        }
        for (i, r) in residual.iter_mut().enumerate() {
            *r = y[i] - fit[i];
        }
    }

    let paths = chosen
        .iter()
        .zip(&gains)
        .map(|(&(angle_sine, distance_m, range_m), &gain)| PathEstimate {
            gain,
            angle_sine,
            distance_m,
            range_m,
            lpu_gains: vec![gain; k],
            track: None,
            angle_clamped: false,
        })
        .collect();
    Ok(OmpOutput {
        paths,
        correlations,
        residual,
    })
}
