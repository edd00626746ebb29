//! The sequential detect / extrapolate / decouple / fit / cancel loop.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::decouple::{decouple_angle, decouple_distance, decouple_range};
use super::dictionary::DelayDictionary;
use super::extrapolate::{extrapolate_delays, search_halfwidth, SubarrayDelayTrack};
use super::gain::{estimate_gain_lpu, gain_regressor, geometry_only, residual_update};
use super::stopping::StoppingRule;
use crate::error::{Error, Result};
use crate::frontend::{AnalogCombiner, ReceivedSignal};
use crate::model::channel::add_delay_row;
use crate::model::{
    subarray_steering, ArrayGeometry, PathParams, SteeringMode, SubcarrierGrid, WidebandChannel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpsConfig {
    /// Antenna-domain steering used for gain fitting and cancellation.
    pub steering: SteeringMode,
    pub max_paths: usize,
    /// Overrides `M_s = ⌈B N_s / (2 f_c)⌉` when set.
    pub search_halfwidth: Option<usize>,
}

impl Default for DpsConfig {
    fn default() -> Self {
        Self {
            steering: SteeringMode::Exact,
            max_paths: 32,
            search_halfwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEstimate {
    /// Composite gain `ρ̂ = mean_k ρ̂_k`.
    pub gain: Complex64,
    pub angle_sine: f64,
    pub distance_m: f64,
    pub range_m: f64,
    pub lpu_gains: Vec<Complex64>,
    /// Delay track behind the estimate; `None` for paths found by a
    /// dictionary baseline.
    pub track: Option<SubarrayDelayTrack>,
    pub angle_clamped: bool,
}

impl PathEstimate {
    /// Geometry as a unit-gain path.
    pub fn geometry(&self) -> PathParams {
        geometry_only(self.angle_sine, self.distance_m, self.range_m)
    }
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Central residual peak at or below `ς`.
    Threshold,
    /// All subarrays reported one grid point; symmetry is uninformative.
    Fallback,
    /// Decoupling produced an unusable distance or range for `max_paths`
    /// seeds; each one was skipped without touching the residual.
    Rejected,
    PathLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpsOutput {
    pub paths: Vec<PathEstimate>,
    pub fallback: bool,
    pub termination: Termination,
    /// Dictionary correlations per iteration that reached extrapolation.
    pub correlations: Vec<usize>,
    pub residual: Array2<Complex64>,
}

pub(crate) fn check_inputs(
    signal: &ReceivedSignal,
    comb: &AnalogCombiner,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Result<()> {
    geom.ensure_even_subarrays()?;
    let want = (geom.num_subarrays(), grid.num_subcarriers());
    if signal.rows.dim() != want {
        return Err(Error::Shape {
            expected: format!("{}x{} received signal", want.0, want.1),
            actual: format!("{}x{}", signal.rows.nrows(), signal.rows.ncols()),
        });
    }
    if comb.num_subarrays() != geom.num_subarrays()
        || comb.antennas_per_subarray() != geom.antennas_per_subarray()
    {
        return Err(Error::Shape {
            expected: format!(
                "{}x{} combiner",
                geom.num_subarrays(),
                geom.antennas_per_subarray()
            ),
            actual: format!("{}x{}", comb.num_subarrays(), comb.antennas_per_subarray()),
        });
    }
    if !(signal.power > 0.0) {
        return Err(Error::InvalidArgument(
            "transmit power must be positive".into(),
        ));
    }
    Ok(())
}

/// Decoupled `(θ̂, d̂, r̂, clamped)`, or `None` when the distance or range is
/// unusable and the path must be rejected.
pub(crate) fn decouple_track(
    track: &SubarrayDelayTrack,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Result<Option<(f64, f64, f64, bool)>> {
    let delays = track.delays();
    let angle = decouple_angle(&delays, geom, grid)?;
    let distance = match decouple_distance(&delays, angle.value, geom, grid) {
        Ok(d) if d > 0.0 && d.is_finite() => d,
        Ok(_) | Err(Error::DistanceUnidentifiable) => return Ok(None),
        Err(e) => return Err(e),
    };
    let range = decouple_range(&delays, angle.value, distance, geom, grid)?;
    if !range.is_finite() {
        return Ok(None);
    }
    Ok(Some((angle.value, distance, range, angle.clamped)))
}

/// Runs the estimator on a combined observation.
///
/// The stopping test uses the central LPU's full delay spectrum, which that
/// LPU computes anyway for detection.
pub fn run_dps(
    signal: &ReceivedSignal,
    comb: &AnalogCombiner,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    rule: &StoppingRule,
    config: &DpsConfig,
) -> Result<DpsOutput> {
    check_inputs(signal, comb, geom, grid)?;
    let dict = DelayDictionary::new(grid.num_subcarriers())?;
    let halfwidth = config
        .search_halfwidth
        .unwrap_or_else(|| search_halfwidth(geom, grid));
    let central = geom.central_subarray();
    let mut rows = signal.rows.clone();
    let mut paths = Vec::new();
    let mut correlations = Vec::new();
    let mut fallback = false;
    let mut skipped = Vec::new();

    let termination = loop {
        if paths.len() >= config.max_paths {
            break Termination::PathLimit;
        }
        let det = dict.detect_excluding(&rows.row(central).to_vec(), &skipped);
        if rule.is_exhausted(det.score) {
            break Termination::Threshold;
        }
        let track = extrapolate_delays(rows.view(), det.index, central, &dict, halfwidth);
        correlations.push(track.correlation_count());
        if track.is_flat() {
            fallback = true;
            break Termination::Fallback;
        }
        let Some((angle, distance, range, clamped)) = decouple_track(&track, geom, grid)? else {
            // Skipped: residual untouched, seed excluded from later scans.
            skipped.push(det.index);
            if skipped.len() >= config.max_paths {
                break Termination::Rejected;
            }
            continue;
        };
        let est = geometry_only(angle, distance, range);
        let mut lpu_gains = Vec::with_capacity(geom.num_subarrays());
        for (k, mut row) in rows.rows_mut().into_iter().enumerate() {
            let v = gain_regressor(k, &est, comb, geom, grid, config.steering);
            let row = row.as_slice_mut().expect("row-major");
            let g = estimate_gain_lpu(row, &v, signal.power, k)?;
            residual_update(row, g, &v, signal.power);
            lpu_gains.push(g);
        }
        let gain = lpu_gains.iter().sum::<Complex64>() / lpu_gains.len() as f64;
        log::debug!(
            "path {}: θ={angle:.6} d={distance:.4} r={range:.4} |ρ|={:.4e}",
            paths.len(),
            gain.norm()
        );
        paths.push(PathEstimate {
            gain,
            angle_sine: angle,
            distance_m: distance,
            range_m: range,
            lpu_gains,
            track: Some(track),
            angle_clamped: clamped,
        });
    };

    Ok(DpsOutput {
        paths,
        fallback,
        termination,
        correlations,
        residual: rows,
    })
}

/// Which gain multiplies each subarray block during reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainCombining {
    /// The array-wide mean `ρ̂`.
    #[default]
    Averaged,
    /// Each subarray's own `ρ̂_k`.
    PerSubarray,
}

/// Where the frequency-dependent delay is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SquintModel {
    /// Once per subarray, at its centre distance `d̃̂_k`.
    #[default]
    Subarray,
    /// At every antenna's exact distance `d̂_n`.
    PerAntenna,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Reconstruction {
    pub steering: SteeringMode,
    pub gains: GainCombining,
    pub squint: SquintModel,
}

/// Full-dimensional channel from path estimates: antenna `n` of subarray
/// `k` gets `ρ̂ w_n(θ̂, d̂) b(Δf (r̂ + d̂_x) / c)` with `d̂_x` the subarray
/// centre or antenna distance.
pub fn reconstruct_channel(
    paths: &[PathEstimate],
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    opts: &Reconstruction,
) -> WidebandChannel {
    let mut h = WidebandChannel::zeros(*geom, *grid);
    let ns = geom.antennas_per_subarray();
    let c = geom.speed_of_light();
    for p in paths {
        let est = p.geometry();
        for k in 0..geom.num_subarrays() {
            let rho = match opts.gains {
                GainCombining::Averaged => p.gain,
                GainCombining::PerSubarray => p.lpu_gains[k],
            };
            let (_, dk) = est.subarray_observed(k, geom);
            let w = subarray_steering(&est, k, geom, opts.steering);
            for (i, wi) in w.iter().enumerate() {
                let n = k * ns + i;
                let dist = match opts.squint {
                    SquintModel::Subarray => dk,
                    SquintModel::PerAntenna => est.antenna_distance(n, geom),
                };
                let mut row = h.entries.row_mut(n);
                add_delay_row(
                    row.as_slice_mut().expect("row-major"),
                    rho * wi,
                    grid.normalized_delay(est.range_m + dist, c),
                );
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{observe, random_combiner};
    use crate::model::synthesize_channel_exact;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reconstruction_from_true_parameters() {
        let geom = ArrayGeometry::new(64, 16, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(32, 600e6).unwrap();
        let path = PathParams::new(Complex64::new(0.5, 0.5), 0.3, 9.0, 4.0);
        let rho = path.composite_gain(&geom);
        let est = PathEstimate {
            gain: rho,
            angle_sine: 0.3,
            distance_m: 9.0,
            range_m: 4.0,
            lpu_gains: vec![rho; 16],
            track: Some(SubarrayDelayTrack {
                indices: vec![0; 16],
                coefficients: vec![0; 16],
                central: 7,
                search_halfwidth: 1,
                num_subcarriers: 32,
            }),
            angle_clamped: false,
        };
        let exact = crate::model::synthesize_channel_exact(&[path], &geom, &grid);
        let opts = Reconstruction {
            squint: SquintModel::PerAntenna,
            ..Reconstruction::default()
        };
        assert!(
            nmse(
                &exact,
                &reconstruct_channel(std::slice::from_ref(&est), &geom, &grid, &opts)
            ) < 1e-24
        );
        let approx = crate::model::synthesize_channel_subarray_approx(
            &[path],
            &geom,
            &grid,
            SteeringMode::Approx,
        );
        let opts = Reconstruction {
            steering: SteeringMode::Approx,
            ..Reconstruction::default()
        };
        assert!(nmse(&approx, &reconstruct_channel(&[est], &geom, &grid, &opts)) < 1e-24);
    }

    fn nmse(a: &WidebandChannel, b: &WidebandChannel) -> f64 {
        let e: f64 = a
            .entries
            .iter()
            .zip(b.entries.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        e / a.energy()
    }

    #[test]
    fn noiseless_single_path_matches_decoupling_oracle() {
        let geom = ArrayGeometry::new(1024, 256, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(1024, 600e6).unwrap();
        let path = PathParams::new(Complex64::new(1.0, 0.0), 0.4, 14.0, 6.0);
        let h = synthesize_channel_exact(&[path], &geom, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let comb = random_combiner(&geom, &mut rng);
        let y = observe(&h, &comb, 1.0, 0.0, &mut rng).unwrap();
        let rule = StoppingRule::new(1e-6, 1024, 1e-3).unwrap();
        let cfg = DpsConfig {
            max_paths: 1,
            ..DpsConfig::default()
        };
        let out = run_dps(&y, &comb, &geom, &grid, &rule, &cfg).unwrap();
        let p = &out.paths[0];
        // Oracle: the same decoupling applied to unquantised subarray delays
        // from exact geometry; the grid then adds a small perturbation.
        let c = geom.speed_of_light();
        let clean: Vec<f64> = (0..256)
            .map(|k| grid.normalized_delay(path.range_m + path.subarray_observed(k, &geom).1, c))
            .collect();
        let theta = decouple_angle(&clean, &geom, &grid).unwrap().value;
        assert!(
            (p.angle_sine - theta).abs() < 2e-3,
            "{} vs {theta}",
            p.angle_sine
        );
        let res = grid.delay_resolution_m(c);
        assert!((p.distance_m + p.range_m - 20.0).abs() < 2.0 * res);
        assert_eq!(
            p.track.as_ref().unwrap().indices[geom.central_subarray()],
            (clean[127] * 1024.0).floor() as i64
        );
        assert_eq!(out.correlations, vec![1024 + 255 * 3]);
        let mean = p.lpu_gains.iter().sum::<Complex64>() / 256.0;
        assert_eq!(p.gain, mean);
        let back = reconstruct_channel(
            &out.paths,
            &geom,
            &grid,
            &Reconstruction {
                gains: GainCombining::PerSubarray,
                ..Reconstruction::default()
            },
        );
        assert!(nmse(&h, &back) < 1.0);
    }

    #[test]
    fn pure_noise_rarely_detects() {
        let geom = ArrayGeometry::new(64, 16, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(128, 600e6).unwrap();
        let h = WidebandChannel::zeros(geom, grid);
        let rule = StoppingRule::new(1.0, 128, 1e-2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut detections = 0;
        for _ in 0..300 {
            let comb = random_combiner(&geom, &mut rng);
            let y = observe(&h, &comb, 1.0, 1.0, &mut rng).unwrap();
            let out = run_dps(&y, &comb, &geom, &grid, &rule, &DpsConfig::default()).unwrap();
            detections +=
                usize::from(!out.paths.is_empty() || out.termination != Termination::Threshold);
        }
        assert!(detections <= 12, "{detections}");
    }

    #[test]
    fn broadside_with_coarse_grid_flags_fallback() {
        let geom = ArrayGeometry::new(128, 16, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(16, 100e6).unwrap();
        let path = PathParams::new(Complex64::new(1.0, 0.0), 0.0, 15.0, 5.0);
        // Oracle: the subarray delay spread is far below one bin.
        let c = geom.speed_of_light();
        let taus: Vec<f64> = (0..16)
            .map(|k| grid.normalized_delay(path.range_m + path.subarray_observed(k, &geom).1, c))
            .collect();
        let spread = taus.iter().cloned().fold(f64::MIN, f64::max)
            - taus.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1.0 / 16.0 / 10.0);
        let h = synthesize_channel_exact(&[path], &geom, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let comb = random_combiner(&geom, &mut rng);
        let y = observe(&h, &comb, 1.0, 0.0, &mut rng).unwrap();
        let rule = StoppingRule::new(1e-6, 16, 1e-3).unwrap();
        let out = run_dps(&y, &comb, &geom, &grid, &rule, &DpsConfig::default()).unwrap();
        assert!(out.fallback);
        assert_eq!(out.termination, Termination::Fallback);
        assert!(out.paths.is_empty());
    }

    #[test]
    fn path_limit_and_shape_checks() {
        let geom = ArrayGeometry::new(256, 64, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(256, 600e6).unwrap();
        let path = PathParams::new(Complex64::new(1.0, 0.0), -0.5, 12.0, 9.0);
        let h = synthesize_channel_exact(&[path], &geom, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let comb = random_combiner(&geom, &mut rng);
        let y = observe(&h, &comb, 1.0, 0.0, &mut rng).unwrap();
        let rule = StoppingRule::new(1e-6, 256, 1e-3).unwrap();
        let cfg = DpsConfig {
            max_paths: 1,
            ..DpsConfig::default()
        };
        let out = run_dps(&y, &comb, &geom, &grid, &rule, &cfg).unwrap();
        assert_eq!(out.paths.len(), 1);
        assert_eq!(out.termination, Termination::PathLimit);
        let other = ArrayGeometry::new(256, 32, 7e9).unwrap();
        assert!(run_dps(&y, &comb, &other, &grid, &rule, &cfg).is_err());
    }
}
