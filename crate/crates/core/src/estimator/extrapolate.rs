//! Serial delay extrapolation outward from the central LPU.

use ndarray::ArrayView2;
use num_complex::Complex64;

use super::dictionary::DelayDictionary;
use crate::model::{ArrayGeometry, SubcarrierGrid};

/// Per-subarray delays of one path as grid indices.
///
/// Indices are unwrapped: `τ̂_k = (i_k + 1/2) / M` may leave `[0, 1)` when a
/// path sits near the edge of the grid. Atoms are 1-periodic, so the
/// correlations are unaffected, while the decoupling sees the physical delay
/// differences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubarrayDelayTrack {
    pub indices: Vec<i64>,
    /// `κ_k = i_k - i_{k∓1}` along the sweep; zero at the central subarray.
    pub coefficients: Vec<i64>,
    pub central: usize,
    pub search_halfwidth: usize,
    pub num_subcarriers: usize,
}

impl SubarrayDelayTrack {
    pub fn delays(&self) -> Vec<f64> {
        let m = self.num_subcarriers as f64;
        self.indices.iter().map(|&i| (i as f64 + 0.5) / m).collect()
    }

    /// Indices reduced into `0..M`.
    pub fn grid_indices(&self) -> Vec<usize> {
        let m = self.num_subcarriers as i64;
        self.indices
            .iter()
            .map(|i| i.rem_euclid(m) as usize)
            .collect()
    }

    /// All subarrays report the same grid point.
    pub fn is_flat(&self) -> bool {
        self.indices.windows(2).all(|w| w[0] == w[1])
    }

    /// Dictionary correlations spent: a full scan at the centre plus
    /// `2M_s + 1` per other subarray.
    pub fn correlation_count(&self) -> usize {
        self.num_subcarriers + (self.indices.len() - 1) * (2 * self.search_halfwidth + 1)
    }
}

/// `M_s = ⌈B N_s / (2 f_c)⌉`.
pub fn search_halfwidth(geom: &ArrayGeometry, grid: &SubcarrierGrid) -> usize {
    let x = grid.bandwidth_hz() * geom.antennas_per_subarray() as f64 / (2.0 * geom.carrier_hz());
    x.ceil() as usize
}

/// Best `κ ∈ [-M_s, M_s]` around `prev`; ties go to the smallest `κ`.
pub fn extrapolation_step(
    dict: &DelayDictionary,
    row: &[Complex64],
    prev: i64,
    halfwidth: usize,
) -> i64 {
    let h = halfwidth as i64;
    let mut best = (-h, f64::NEG_INFINITY);
    for kappa in -h..=h {
        let s = dict
            .correlate(dict.grid_delay(prev + kappa), row)
            .norm_sqr();
        if s > best.1 {
            best = (kappa, s);
        }
    }
    best.0
}

/// Sweeps `central+1..K` and `central-1..=0` from the seed index.
pub fn extrapolate_delays(
    rows: ArrayView2<'_, Complex64>,
    seed_index: usize,
    central: usize,
    dict: &DelayDictionary,
    halfwidth: usize,
) -> SubarrayDelayTrack {
    let k = rows.nrows();
    let mut indices = vec![0i64; k];
    let mut coefficients = vec![0i64; k];
    indices[central] = seed_index as i64;
    let row = |i: usize| rows.row(i).to_vec();
    for i in central + 1..k {
        let kappa = extrapolation_step(dict, &row(i), indices[i - 1], halfwidth);
        coefficients[i] = kappa;
        indices[i] = indices[i - 1] + kappa;
    }
    for i in (0..central).rev() {
        let kappa = extrapolation_step(dict, &row(i), indices[i + 1], halfwidth);
        coefficients[i] = kappa;
        indices[i] = indices[i + 1] + kappa;
    }
    SubarrayDelayTrack {
        indices,
        coefficients,
        central,
        search_halfwidth: halfwidth,
        num_subcarriers: dict.size(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::random_combiner;
    use crate::model::{synthesize_channel_exact, PathParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_halfwidth() {
        let geom = ArrayGeometry::new(1024, 256, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(1024, 600e6).unwrap();
        // 600e6 * 4 / 14e9 = 0.1714
        assert_eq!(search_halfwidth(&geom, &grid), 1);
        let geom = ArrayGeometry::new(1024, 32, 7e9).unwrap();
        // 600e6 * 32 / 14e9 = 1.371
        assert_eq!(search_halfwidth(&geom, &grid), 2);
    }

    fn track_for(
        path: PathParams,
        geom: &ArrayGeometry,
        grid: &SubcarrierGrid,
    ) -> SubarrayDelayTrack {
        let h = synthesize_channel_exact(&[path], geom, grid);
        let comb = random_combiner(geom, &mut ChaCha8Rng::seed_from_u64(3));
        let y = comb.combine(&h).unwrap();
        let dict = DelayDictionary::new(grid.num_subcarriers()).unwrap();
        let central = geom.central_subarray();
        let seed = dict.detect(&y.row(central).to_vec()).index;
        extrapolate_delays(y.view(), seed, central, &dict, search_halfwidth(geom, grid))
    }

    #[test]
    fn broadside_is_flat() {
        let geom = ArrayGeometry::new(256, 32, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(64, 600e6).unwrap();
        let t = track_for(
            PathParams::new(Complex64::new(1.0, 0.0), 0.0, 12.0, 4.0),
            &geom,
            &grid,
        );
        assert!(t.coefficients.iter().all(|&k| k == 0));
        assert!(t.is_flat());
    }

    #[test]
    fn steep_path_follows_quantised_geometry() {
        let geom = ArrayGeometry::new(1024, 256, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(1024, 600e6).unwrap();
        let path = PathParams::new(Complex64::new(1.0, 0.0), 0.8, 15.0, 10.0);
        let t = track_for(path, &geom, &grid);
        let m = grid.num_subcarriers() as f64;
        let c = geom.speed_of_light();
        // Oracle: subarray-centre delays from exact geometry, rounded to the
        // nearest grid point (i + 1/2)/M.
        let oracle: Vec<i64> = (0..geom.num_subarrays())
            .map(|k| {
                let (_, dk) = path.subarray_observed(k, &geom);
                (grid.normalized_delay(path.range_m + dk, c) * m - 0.5).round() as i64
            })
            .collect();
        let mismatches = t
            .indices
            .iter()
            .zip(&oracle)
            .filter(|(a, b)| a != b)
            .count();
        assert!(
            mismatches <= geom.num_subarrays() / 20,
            "{mismatches} mismatches"
        );
        assert!(t.coefficients.iter().all(|k| k.abs() <= 1));
        // θ > 0 pulls the delay down across k.
        assert!(t.indices.first() > t.indices.last());
        assert!(t.indices.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(t.correlation_count(), 1024 + 255 * 3);
    }

    #[test]
    fn kappa_invariant_holds() {
        let geom = ArrayGeometry::new(512, 64, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(256, 600e6).unwrap();
        let t = track_for(
            PathParams::new(Complex64::new(0.3, -1.0), -0.5, 11.0, 3.0),
            &geom,
            &grid,
        );
        for k in t.central + 1..t.indices.len() {
            assert_eq!(t.indices[k] - t.indices[k - 1], t.coefficients[k]);
        }
        for k in 0..t.central {
            assert_eq!(t.indices[k] - t.indices[k + 1], t.coefficients[k]);
        }
        assert_eq!(t.coefficients[t.central], 0);
    }
}
