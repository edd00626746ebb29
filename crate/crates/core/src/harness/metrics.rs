//! Error metrics.

use crate::error::{Error, Result};
use crate::estimator::PathEstimate;
use crate::model::{PathParams, WidebandChannel};

/// `‖vec(Ĥ − H)‖² / ‖vec(H)‖²`.
pub fn nmse(truth: &WidebandChannel, estimate: &WidebandChannel) -> Result<f64> {
    if truth.entries.dim() != estimate.entries.dim() {
        return Err(Error::Shape {
            expected: format!("{:?}", truth.entries.dim()),
            actual: format!("{:?}", estimate.entries.dim()),
        });
    }
    let energy = truth.energy();
    if energy == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let err: f64 = truth
        .entries
        .iter()
        .zip(estimate.entries.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / energy)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// RMS errors `(θ, d, r)` over true paths greedily paired with estimates by
/// closest `r + d`. `None` when nothing was estimated.
pub fn parameter_errors(truth: &[PathParams], estimates: &[PathEstimate]) -> Option<[f64; 3]> {
    if truth.is_empty() || estimates.is_empty() {
        return None;
    }
    let mut pairs = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in estimates.iter().enumerate() {
            let gap = (t.range_m + t.distance_m - e.range_m - e.distance_m).abs();
            pairs.push((gap, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_t, mut used_e) = (vec![false; truth.len()], vec![false; estimates.len()]);
    let mut sums = [0.0; 3];
    let mut n = 0usize;
    for (_, i, j) in pairs {
        if used_t[i] || used_e[j] {
            continue;
        }
        used_t[i] = true;
        used_e[j] = true;
        let (t, e) = (&truth[i], &estimates[j]);
        sums[0] += (e.angle_sine - t.angle_sine).powi(2);
        sums[1] += (e.distance_m - t.distance_m).powi(2);
        sums[2] += (e.range_m - t.range_m).powi(2);
        n += 1;
    }
    Some(sums.map(|s| (s / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synthesize_channel_exact, ArrayGeometry, SubcarrierGrid};
    use num_complex::Complex64;

    #[test]
    fn nmse_reference_values() {
        let geom = ArrayGeometry::new(16, 4, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(8, 600e6).unwrap();
        let p = PathParams::new(Complex64::new(0.3, -0.2), 0.1, 12.0, 3.0);
        let h = synthesize_channel_exact(&[p], &geom, &grid);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert_eq!(nmse(&h, &WidebandChannel::zeros(geom, grid)).unwrap(), 1.0);
        let mut twice = h.clone();
        twice.entries.mapv_inplace(|v| v * 2.0);
        assert!((nmse(&h, &twice).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            nmse(&WidebandChannel::zeros(geom, grid), &h),
            Err(Error::ZeroChannel)
        );
        assert_eq!(to_db(0.001), -30.0);
    }
}
