//! Hybrid analog combining front end.
//!
//! Each subarray owns one RF chain behind `N_s` constant-modulus phase
//! shifters. The digital side sees `Y = √P A H + Z` with
//! `A = blkdiag(f_1ᴴ, …, f_Kᴴ)`; noise is injected after combining with
//! per-entry variance `σ²`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{subarray_steering, ArrayGeometry, PathParams, SteeringMode, WidebandChannel};

/// Per-subarray phase-shift vectors; row `k` holds `f_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogCombiner {
    weights: Array2<Complex64>,
}

/// Combined observation `Y` (`K × M`) with its power and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    pub rows: Array2<Complex64>,
    pub power: f64,
    pub noise_variance: f64,
}

impl AnalogCombiner {
    /// Wraps explicit weights; every entry must have modulus `1/√N_s`.
    pub fn from_weights(weights: Array2<Complex64>) -> Result<Self> {
        let ns = weights.ncols();
        if ns == 0 || weights.nrows() == 0 {
            return Err(Error::InvalidArgument("empty combiner".into()));
        }
        let amp = 1.0 / (ns as f64).sqrt();
        if weights.iter().any(|w| (w.norm() - amp).abs() > 1e-9 * amp) {
            return Err(Error::InvalidArgument(
                "combiner entries must have modulus 1/sqrt(N_s)".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn num_subarrays(&self) -> usize {
        self.weights.nrows()
    }

    pub fn antennas_per_subarray(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<Complex64> {
        &self.weights
    }

    /// `f_k` of the 0-based subarray.
    pub fn vector(&self, k0: usize) -> Array1<Complex64> {
        self.weights.row(k0).to_owned()
    }

    /// `f_kᴴ v` for a length-`N_s` vector.
    pub fn project(&self, k0: usize, v: &Array1<Complex64>) -> Complex64 {
        self.weights
            .row(k0)
            .iter()
            .zip(v.iter())
            .map(|(f, x)| f.conj() * x)
            .sum()
    }

    /// Dense `K × N` matrix `A`.
    pub fn block_matrix(&self) -> Array2<Complex64> {
        let (k, ns) = self.weights.dim();
        let mut a = Array2::zeros((k, k * ns));
        for kk in 0..k {
            for i in 0..ns {
                a[[kk, kk * ns + i]] = self.weights[[kk, i]].conj();
            }
        }
        a
    }

    /// `A H`, computed block by block.
    pub fn combine(&self, channel: &WidebandChannel) -> Result<Array2<Complex64>> {
        let geom = &channel.geometry;
        if geom.num_subarrays() != self.num_subarrays()
            || geom.antennas_per_subarray() != self.antennas_per_subarray()
        {
            return Err(Error::Shape {
                expected: format!(
                    "{}x{} combiner",
                    geom.num_subarrays(),
                    geom.antennas_per_subarray()
                ),
                actual: format!("{:?}", self.weights.dim()),
            });
        }
        let m = channel.grid.num_subcarriers();
        let mut out = Array2::zeros((self.num_subarrays(), m));
        for k in 0..self.num_subarrays() {
            let block = channel.subarray_block(k);
            let f = self.weights.row(k);
            let mut row = out.row_mut(k);
            for (i, fi) in f.iter().enumerate() {
                row.scaled_add(fi.conj(), &block.row(i));
            }
        }
        Ok(out)
    }
}

/// Random constant-modulus combiner with i.i.d. uniform phases.
pub fn random_combiner<R: Rng + ?Sized>(geom: &ArrayGeometry, rng: &mut R) -> AnalogCombiner {
    let ns = geom.antennas_per_subarray();
    let amp = 1.0 / (ns as f64).sqrt();
    let weights = Array2::from_shape_simple_fn((geom.num_subarrays(), ns), || {
        Complex64::from_polar(amp, rng.random_range(0.0..2.0 * PI))
    });
    AnalogCombiner { weights }
}

/// Matched combiner `f_k = e^{j 2π f_c (r+d)/c} w_k(θ, d) / √N_s` for a single path.
pub fn optimal_combiner(
    path: &PathParams,
    geom: &ArrayGeometry,
    mode: SteeringMode,
) -> AnalogCombiner {
    let ns = geom.antennas_per_subarray();
    let scale = path.composite_gain(geom) / path.gain / (ns as f64).sqrt();
    let mut weights = Array2::zeros((geom.num_subarrays(), ns));
    for k in 0..geom.num_subarrays() {
        let w = subarray_steering(path, k, geom, mode);
        weights.row_mut(k).assign(&w.mapv(|x| x * scale));
    }
    AnalogCombiner { weights }
}

/// `Y = √P A H + Z`, `Z` i.i.d. `CN(0, σ²)`.
pub fn observe<R: Rng + ?Sized>(
    channel: &WidebandChannel,
    comb: &AnalogCombiner,
    power: f64,
    noise_variance: f64,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    if !(power >= 0.0 && noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(
            "power and noise variance must be non-negative".into(),
        ));
    }
    let mut rows = comb.combine(channel)?;
    rows.mapv_inplace(|v| v * power.sqrt());
    add_noise(&mut rows, noise_variance, rng);
    Ok(ReceivedSignal {
        rows,
        power,
        noise_variance,
    })
}

/// Adds circularly-symmetric Gaussian noise of per-entry variance `σ²`.
pub fn add_noise<R: Rng + ?Sized>(rows: &mut Array2<Complex64>, noise_variance: f64, rng: &mut R) {
    if noise_variance == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, (noise_variance / 2.0).sqrt()).expect("finite std");
    for v in rows.iter_mut() {
        *v += Complex64::new(normal.sample(rng), normal.sample(rng));
    }
}

/// `10 log10(P ‖vec(AH)‖² / (K M σ²))`.
pub fn snr_db(
    channel: &WidebandChannel,
    comb: &AnalogCombiner,
    power: f64,
    noise_variance: f64,
) -> Result<f64> {
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument(
            "SNR undefined for zero noise variance".into(),
        ));
    }
    let ah = comb.combine(channel)?;
    let energy: f64 = ah.iter().map(|v| v.norm_sqr()).sum();
    Ok(10.0 * (power * energy / (ah.len() as f64 * noise_variance)).log10())
}

/// Noise variance that realises `snr_db` for this channel and combiner.
pub fn noise_variance_for_snr(
    channel: &WidebandChannel,
    comb: &AnalogCombiner,
    power: f64,
    snr_db: f64,
) -> Result<f64> {
    let ah = comb.combine(channel)?;
    let energy: f64 = ah.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(power * energy / (ah.len() as f64 * 10f64.powf(snr_db / 10.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        freq_steering, synthesize_channel, synthesize_channel_exact, SubcarrierGrid,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ArrayGeometry, SubcarrierGrid) {
        (
            ArrayGeometry::new(64, 16, 7e9).unwrap(),
            SubcarrierGrid::from_bandwidth(32, 600e6).unwrap(),
        )
    }

    fn path() -> PathParams {
        PathParams::new(Complex64::new(0.7, -0.4), 0.3, 12.0, 6.0)
    }

    #[test]
    fn random_combiner_is_constant_modulus_and_seeded() {
        let (g, _) = setup();
        let a = random_combiner(&g, &mut ChaCha8Rng::seed_from_u64(5));
        let b = random_combiner(&g, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        for k in 0..16 {
            let norm: f64 = a.vector(k).iter().map(|v| v.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let single = ArrayGeometry::new(8, 8, 7e9).unwrap();
        let c = random_combiner(&single, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(c.weights().iter().all(|w| (w.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn block_action_matches_dense_product() {
        let (g, grid) = setup();
        let h = synthesize_channel_exact(&[path()], &g, &grid);
        let comb = random_combiner(&g, &mut ChaCha8Rng::seed_from_u64(2));
        let dense = comb.block_matrix().dot(&h.entries);
        let blocks = comb.combine(&h).unwrap();
        for (x, y) in dense.iter().zip(blocks.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
        // A Aᴴ = I for unit-norm f_k.
        let a = comb.block_matrix();
        let gram = a.dot(&a.t().mapv(|v| v.conj()));
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn optimal_combiner_collapses_subarray_channel() {
        let (g, grid) = setup();
        let p = path();
        let h = synthesize_channel_subarray_approx_for(&p, &g, &grid);
        let comb = optimal_combiner(&p, &g, SteeringMode::Approx);
        let y = comb.combine(&h).unwrap();
        let ns = g.antennas_per_subarray() as f64;
        for k in 0..16 {
            let (_, dk) = p.subarray_observed(k, &g);
            // Component form: phase (r + d̃_k) per subcarrier offset.
            let pk = freq_steering(dk, p.range_m, &grid, g.speed_of_light());
            for m in 0..32 {
                let want = p.gain * ns.sqrt() * pk[m];
                assert!((y[[k, m]] - want).norm() < 1e-10 * want.norm());
            }
        }
    }

    fn synthesize_channel_subarray_approx_for(
        p: &PathParams,
        g: &ArrayGeometry,
        grid: &SubcarrierGrid,
    ) -> WidebandChannel {
        crate::model::synthesize_channel_subarray_approx(&[*p], g, grid, SteeringMode::Approx)
    }

    #[test]
    fn matched_filter_dominates() {
        let (g, _) = setup();
        let p = path();
        let comb = optimal_combiner(&p, &g, SteeringMode::Exact);
        let other = PathParams::new(p.gain, -0.2, 7.0, 1.0);
        let ns = g.antennas_per_subarray() as f64;
        for k in 0..16 {
            let own = comb
                .project(k, &subarray_steering(&p, k, &g, SteeringMode::Exact))
                .norm();
            let mis = comb
                .project(k, &subarray_steering(&other, k, &g, SteeringMode::Exact))
                .norm();
            assert!((own - ns.sqrt()).abs() < 1e-12);
            assert!(mis <= own + 1e-12);
        }
    }

    #[test]
    fn observation_edge_cases() {
        let (g, grid) = setup();
        let h = synthesize_channel(&[path()], &g, &grid, SteeringMode::Exact);
        let comb = random_combiner(&g, &mut ChaCha8Rng::seed_from_u64(3));
        let clean = observe(&h, &comb, 2.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ah = comb.combine(&h).unwrap();
        for (x, y) in clean.rows.iter().zip(ah.iter()) {
            assert!((x - y * 2f64.sqrt()).norm() < 1e-12);
        }
        let noise_only = observe(&h, &comb, 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut z = Array2::zeros((16, 32));
        add_noise(&mut z, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(noise_only.rows, z);
        let a = observe(&h, &comb, 1.0, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = observe(&h, &comb, 1.0, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let sigma2 = 0.8;
        // 16 x 32 x 200 ≈ 1e5 samples.
        let (mut sum, mut cross, mut count) = (0.0, Complex64::new(0.0, 0.0), 0usize);
        for _ in 0..200 {
            let mut z = Array2::zeros((16, 32));
            add_noise(&mut z, sigma2, &mut rng);
            sum += z.iter().map(|v| v.norm_sqr()).sum::<f64>();
            count += z.len();
            cross += z
                .row(0)
                .iter()
                .zip(z.row(1).iter())
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>();
        }
        let var = sum / count as f64;
        assert!((var - sigma2).abs() < 0.02 * sigma2, "{var}");
        let corr = cross.norm() / (200.0 * 32.0 * sigma2);
        assert!(corr < 0.05, "{corr}");
    }

    #[test]
    fn snr_accounting() {
        let (g, grid) = setup();
        let h = synthesize_channel_exact(&[path()], &g, &grid);
        let comb = random_combiner(&g, &mut ChaCha8Rng::seed_from_u64(8));
        let sigma2 = noise_variance_for_snr(&h, &comb, 1.0, 0.0).unwrap();
        assert!(snr_db(&h, &comb, 1.0, sigma2).unwrap().abs() < 1e-12);
        let base = snr_db(&h, &comb, 1.0, 0.3).unwrap();
        assert!((snr_db(&h, &comb, 2.0, 0.3).unwrap() - base - 3.010_299_956_639_812).abs() < 1e-9);
        assert!(
            (snr_db(&h, &comb, 1.0, 0.15).unwrap() - base - 3.010_299_956_639_812).abs() < 1e-9
        );
        assert!(snr_db(&h, &comb, 1.0, 0.0).is_err());
        // Global phase rotation of every f_k leaves SNR unchanged.
        let rot = Complex64::from_polar(1.0, 1.234);
        let rotated = AnalogCombiner::from_weights(comb.weights().mapv(|v| v * rot)).unwrap();
        assert!((snr_db(&h, &rotated, 1.0, 0.3).unwrap() - base).abs() < 1e-12);
    }
}
