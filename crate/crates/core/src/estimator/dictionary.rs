//! DFT delay dictionary and per-LPU maximum-likelihood delay detection.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::geometry::centered;

/// Grid `τ̄_m = (2m - 1) / (2M)` with atoms `b(τ̄_m)`.
///
/// Grid points are addressed by a signed "unwrapped" index `i`, with
/// `τ = (i + 1/2) / M`; since `b(τ)` is 1-periodic, index `i` and
/// `i mod M` name the same atom.
#[derive(Clone)]
pub struct DelayDictionary {
    size: usize,
    offsets: Vec<f64>,
    twiddle: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DelayDictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayDictionary")
            .field("size", &self.size)
            .finish()
    }
}

/// Result of a full-dictionary search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub index: usize,
    pub delay: f64,
    /// `|bᴴ y|² / ‖b‖²` at the winning atom.
    pub score: f64,
}

impl DelayDictionary {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyDictionary);
        }
        let offsets = (0..size).map(|m| centered(m, size)).collect();
        let twiddle = (0..size)
            .map(|i| Complex64::from_polar(1.0, -PI * i as f64 / size as f64))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        Ok(Self {
            size,
            offsets,
            twiddle,
            fft,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Normalised delay of the (possibly unwrapped) grid index.
    pub fn grid_delay(&self, index: i64) -> f64 {
        (index as f64 + 0.5) / self.size as f64
    }

    /// Atom `b(τ)` for an arbitrary delay.
    pub fn atom(&self, tau: f64) -> Vec<Complex64> {
        self.offsets
            .iter()
            .map(|d| Complex64::from_polar(1.0, 2.0 * PI * d * tau))
            .collect()
    }

    /// `bᴴ(τ) y`, evaluated directly in `O(M)`.
    pub fn correlate(&self, tau: f64, y: &[Complex64]) -> Complex64 {
        debug_assert_eq!(y.len(), self.size);
        self.offsets
            .iter()
            .zip(y)
            .map(|(d, v)| Complex64::from_polar(1.0, -2.0 * PI * d * tau) * v)
            .sum()
    }

    /// `|bᴴ(τ̄_m) y|² / M` for every grid point, via one FFT.
    ///
    /// `bᴴ(τ̄_q) y` equals, up to a unit-modulus factor, the `q`-th DFT bin
    /// of `y_i e^{-jπ i / M}`.
    pub fn scores(&self, y: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.size);
        let mut buf: Vec<Complex64> = y.iter().zip(&self.twiddle).map(|(v, t)| v * t).collect();
        self.fft.process(&mut buf);
        let m = self.size as f64;
        buf.iter().map(|v| v.norm_sqr() / m).collect()
    }

    /// Largest score, i.e. `(max |F_τᴴ y|)²`.
    pub fn peak_score(&self, y: &[Complex64]) -> f64 {
        self.scores(y).into_iter().fold(0.0, f64::max)
    }

    /// Maximum-likelihood on-grid delay; ties go to the smallest index.
    pub fn detect(&self, y: &[Complex64]) -> Detection {
        self.detect_excluding(y, &[])
    }

    /// [`detect`](Self::detect) restricted to grid points not in `excluded`.
    /// Returns a zero score when every point is excluded.
    pub fn detect_excluding(&self, y: &[Complex64], excluded: &[usize]) -> Detection {
        let scores = self.scores(y);
        let mut best: Option<usize> = None;
        for (i, s) in scores.iter().enumerate() {
            if excluded.contains(&i) {
                continue;
            }
            if best.is_none_or(|b| *s > scores[b]) {
                best = Some(i);
            }
        }
        let index = best.unwrap_or(0);
        Detection {
            index,
            delay: self.grid_delay(index as i64),
            score: best.map_or(0.0, |b| scores[b]),
        }
    }
}

pub fn ml_delay_detect(y: &[Complex64], dict: &DelayDictionary) -> Result<Detection> {
    if y.len() != dict.size() {
        return Err(Error::Shape {
            expected: format!("length {}", dict.size()),
            actual: format!("{}", y.len()),
        });
    }
    Ok(dict.detect(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force scores straight from the atom definition.
    fn brute_scores(dict: &DelayDictionary, y: &[Complex64]) -> Vec<f64> {
        (0..dict.size() as i64)
            .map(|i| {
                let b = dict.atom(dict.grid_delay(i));
                let c: Complex64 = b.iter().zip(y).map(|(a, v)| a.conj() * v).sum();
                c.norm_sqr() / b.iter().map(|a| a.norm_sqr()).sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn atoms_are_orthogonal() {
        let dict = DelayDictionary::new(64).unwrap();
        for i in 0..64 {
            let bi = dict.atom(dict.grid_delay(i));
            assert!((bi.iter().map(|v| v.norm_sqr()).sum::<f64>() - 64.0).abs() < 1e-12);
            for j in (i + 1)..64 {
                let c = dict.correlate(dict.grid_delay(j), &bi);
                assert!(c.norm() <= 1e-9, "{i} {j} {}", c.norm());
            }
        }
    }

    #[test]
    fn fft_scores_match_brute_force() {
        let dict = DelayDictionary::new(48).unwrap();
        let y: Vec<Complex64> = (0..48)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let fast = dict.scores(&y);
        let slow = brute_scores(&dict, &y);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b));
        }
    }

    #[test]
    fn on_grid_atom_detection() {
        let dict = DelayDictionary::new(64).unwrap();
        // τ̄_7 is 1-based grid point 7, i.e. index 6.
        let y = dict.atom(dict.grid_delay(6));
        let det = ml_delay_detect(&y, &dict).unwrap();
        assert_eq!(det.index, 6);
        assert!((det.score - 64.0).abs() < 1e-9);
        let scale = Complex64::new(-0.3, 2.2);
        let scaled: Vec<_> = y.iter().map(|v| v * scale).collect();
        assert_eq!(dict.detect(&scaled).index, 6);
    }

    #[test]
    fn two_atom_mixture_picks_stronger() {
        let dict = DelayDictionary::new(64).unwrap();
        let (a, b) = (dict.atom(dict.grid_delay(2)), dict.atom(dict.grid_delay(8)));
        let y: Vec<_> = a.iter().zip(&b).map(|(x, z)| x * 2.0 + z).collect();
        let slow = brute_scores(&dict, &y);
        let best = (0..64).fold(0, |bi, i| if slow[i] > slow[bi] { i } else { bi });
        assert_eq!(best, 2);
        assert_eq!(dict.detect(&y).index, best);
    }

    #[test]
    fn zero_input_and_shape_errors() {
        let dict = DelayDictionary::new(16).unwrap();
        let det = dict.detect(&[Complex64::new(0.0, 0.0); 16]);
        assert_eq!((det.index, det.score), (0, 0.0));
        assert!(ml_delay_detect(&[Complex64::new(0.0, 0.0); 3], &dict).is_err());
        assert!(DelayDictionary::new(0).is_err());
    }

    #[test]
    fn unwrapped_indices_alias() {
        let dict = DelayDictionary::new(32).unwrap();
        let y = dict.atom(0.123);
        let a = dict.correlate(dict.grid_delay(-3), &y);
        let b = dict.correlate(dict.grid_delay(29), &y);
        assert!((a.norm() - b.norm()).abs() < 1e-10);
    }
}
