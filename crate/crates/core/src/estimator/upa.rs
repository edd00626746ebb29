//! Planar-array decoupling from a full per-element delay map.

use crate::error::{Error, Result};
use crate::model::geometry::centered;
use crate::model::UpaGeometry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub distance_m: f64,
    pub range_m: f64,
}

/// Recovers `(α, β, d, r)` from `η(n_r, n_c)` in metres, with
/// `η = r + d - δ_r s α - δ_c s β + [δ_r² s²(1-α²) + δ_c² s²(1-β²)] / (2d)`.
///
/// `α` comes from row mirrors `η(N_r-1-n_r, n_c) - η(n_r, n_c) = 2 δ_r s α`,
/// `β` likewise from column mirrors, `d` from the diagonal half-shift
/// `(n_r, n_c) → (n_r + N_r/2, n_c + N_c/2)` and `r` from full mirrors.
pub fn upa_decouple(eta: &[Vec<f64>], upa: &UpaGeometry) -> Result<UpaEstimate> {
    let (nr, nc) = (upa.rows(), upa.cols());
    if eta.len() != nr || eta.iter().any(|row| row.len() != nc) {
        return Err(Error::Shape {
            expected: format!("{nr}x{nc} delay map"),
            actual: format!("{}x{}", eta.len(), eta.first().map_or(0, Vec::len)),
        });
    }
    let s = upa.spacing();

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..nr / 2 {
        let d = centered(i, nr);
        for j in 0..nc {
            num += d * (eta[nr - 1 - i][j] - eta[i][j]);
            den += d * d;
        }
    }
    let alpha = num / (2.0 * s * den);

    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..nc / 2 {
        let d = centered(j, nc);
        for row in eta {
            num += d * (row[nc - 1 - j] - row[j]);
            den += d * d;
        }
    }
    let beta = num / (2.0 * s * den);

    // d v = q with v = Δη + (N_r/2) s α + (N_c/2) s β and
    // q = s²/2 [(1-α²)(N_r δ_r + N_r²/4) + (1-β²)(N_c δ_c + N_c²/4)].
    let (hr, hc) = (nr as f64 / 2.0, nc as f64 / 2.0);
    let (mut vq, mut vv, mut vmax) = (0.0, 0.0, 0.0f64);
    for i in 0..nr / 2 {
        for j in 0..nc / 2 {
            let v = eta[i + nr / 2][j + nc / 2] - eta[i][j] + hr * s * alpha + hc * s * beta;
            let q = s * s / 2.0
                * ((1.0 - alpha * alpha) * (nr as f64 * centered(i, nr) + hr * hr)
                    + (1.0 - beta * beta) * (nc as f64 * centered(j, nc) + hc * hc));
            vq += v * q;
            vv += v * v;
            vmax = vmax.max(v.abs());
        }
    }
    if vmax <= 1e-12 * s * (hr + hc) {
        return Err(Error::DistanceUnidentifiable);
    }
    let distance = vq / vv;
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::DistanceUnidentifiable);
    }

    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..nr / 2 {
        let dr = centered(i, nr);
        for j in 0..nc {
            let dc = centered(j, nc);
            let curv = s * s * (dr * dr * (1.0 - alpha * alpha) + dc * dc * (1.0 - beta * beta))
                / distance;
            acc += 0.5 * (eta[nr - 1 - i][nc - 1 - j] + eta[i][j] - curv);
            count += 1;
        }
    }
    Ok(UpaEstimate {
        alpha,
        beta,
        distance_m: distance,
        range_m: acc / count as f64 - distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::decouple::decouple_angle;
    use crate::model::{ArrayGeometry, SubcarrierGrid};

    fn model_map(alpha: f64, beta: f64, d: f64, r: f64, upa: &UpaGeometry) -> Vec<Vec<f64>> {
        let s = upa.spacing();
        (0..upa.rows())
            .map(|i| {
                (0..upa.cols())
                    .map(|j| {
                        let (x, y) = (centered(i, upa.rows()) * s, centered(j, upa.cols()) * s);
                        r + d - x * alpha - y * beta
                            + (x * x * (1.0 - alpha * alpha) + y * y * (1.0 - beta * beta))
                                / (2.0 * d)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn broadside_recovers_zero_angles() {
        let upa = UpaGeometry::new(16, 8, 0.02, 7e9).unwrap();
        let e = upa_decouple(&model_map(0.0, 0.0, 12.0, 3.0, &upa), &upa).unwrap();
        assert_eq!((e.alpha, e.beta), (0.0, 0.0));
        assert!((e.distance_m - 12.0).abs() < 1e-9);
    }

    #[test]
    fn model_map_round_trip() {
        let upa = UpaGeometry::new(32, 16, 0.0214, 7e9).unwrap();
        let e = upa_decouple(&model_map(0.3, -0.2, 15.0, 5.0, &upa), &upa).unwrap();
        assert!((e.alpha - 0.3).abs() < 1e-9);
        assert!((e.beta + 0.2).abs() < 1e-9);
        assert!((e.distance_m - 15.0).abs() < 1e-9 * 15.0);
        assert!((e.range_m - 5.0).abs() < 1e-9 * 5.0);
    }

    #[test]
    fn column_reduces_to_linear_decoupling() {
        let (nr, s, fc) = (64, 0.0214, 7e9);
        let upa = UpaGeometry::new(nr, 2, s, fc).unwrap();
        let map = model_map(0.45, 0.0, 13.0, 2.0, &upa);
        let e = upa_decouple(&map, &upa).unwrap();
        // Oracle: the linear-array routine with one antenna per subarray on
        // the first column, converted to normalised delays.
        let geom = ArrayGeometry::with_spacing(nr, nr, fc, s).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(256, 600e6).unwrap();
        let c = geom.speed_of_light();
        let tau: Vec<f64> = map
            .iter()
            .map(|row| grid.normalized_delay(row[0], c))
            .collect();
        let ula = decouple_angle(&tau, &geom, &grid).unwrap().value;
        assert!((e.alpha - ula).abs() < 1e-12, "{} vs {ula}", e.alpha);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let upa = UpaGeometry::new(4, 4, 0.02, 7e9).unwrap();
        assert!(upa_decouple(&vec![vec![1.0; 4]; 3], &upa).is_err());
        assert!(matches!(
            upa_decouple(&vec![vec![1.0; 4]; 4], &upa),
            Err(Error::DistanceUnidentifiable)
        ));
    }
}
