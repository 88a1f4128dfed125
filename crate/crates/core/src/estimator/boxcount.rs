use std::collections::HashSet;

use serde::Serialize;

use super::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::stats::linear_fit;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CoverMethod {
    Grid,
    Cylinder,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub r: f64,
    pub count: u64,
    pub method: CoverMethod,
    /// `|C_n|` for the cylinder method.
    pub stopping_set: Option<u64>,
    /// `A_n` for the cylinder method.
    pub bound: Option<f64>,
}

/// Occupied cells of the grid of mesh `r` anchored at `origin`.
pub fn grid_cells(points: &[Vec<f64>], origin: &[f64], r: f64) -> HashSet<Vec<i64>> {
    points
        .iter()
        .map(|p| p.iter().zip(origin).map(|(x, o)| ((x - o) / r).floor() as i64).collect())
        .collect()
}

/// Number of occupied cells of mesh `r`, anchored at the cloud's origin
/// (the bounding box corner for sampled clouds).
///
/// A set meeting `N` cells of mesh `r` can be covered by `N` balls of radius
/// `r√d`, and one ball of radius `r` meets at most `3^d` cells, so the grid
/// count agrees with the ball count up to constants independent of `r`.
pub fn box_count(cloud: &PointCloud, r: f64) -> Result<CoverReport> {
    if !(r > 0.0) {
        return Err(Error::Argument(format!("mesh must be positive, got {r}")));
    }
    let count = if cloud.points.is_empty() {
        0
    } else {
        grid_cells(&cloud.points, &cloud.origin, r).len() as u64
    };
    Ok(CoverReport {
        r,
        count,
        method: CoverMethod::Grid,
        stopping_set: None,
        bound: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxDimensionEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub ci: (f64, f64),
    pub intercept: f64,
    /// Radii actually used, after dropping those below `2·max error radius`.
    pub radii: Vec<f64>,
    pub counts: Vec<u64>,
    pub residuals: Vec<f64>,
    pub clipped: usize,
}

/// Least-squares slope of `log N_r` against `−log r`.
pub fn estimate_box_dimension(cloud: &PointCloud, radii: &[f64]) -> Result<BoxDimensionEstimate> {
    let mut rs: Vec<f64> = radii.to_vec();
    rs.sort_by(|a, b| b.total_cmp(a));
    rs.dedup();
    if rs.len() < 4 || rs[0] / rs[rs.len() - 1] < 8.0 - 1e-9 {
        return Err(Error::Argument("need at least 4 radii spanning at least 3 octaves".into()));
    }
    let floor = 2.0 * cloud.max_error();
    let before = rs.len();
    rs.retain(|&r| r >= floor);
    let clipped = before - rs.len();
    if rs.len() < 2 {
        return Err(Error::DegenerateFit(format!("fewer than two radii above the resolution floor {floor:e}")));
    }
    let counts: Vec<u64> = rs.iter().map(|&r| box_count(cloud, r).map(|c| c.count)).collect::<Result<_>>()?;
    if counts.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateFit("all box counts are equal".into()));
    }
    let x: Vec<f64> = rs.iter().map(|r| -r.ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(BoxDimensionEstimate {
        slope: fit.slope,
        stderr: fit.slope_stderr,
        ci: fit.slope_ci,
        intercept: fit.intercept,
        radii: rs,
        counts,
        residuals: fit.residuals,
        clipped,
    })
}

/// `2^{-lo}, .., 2^{-hi}`.
pub fn dyadic_radii(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| 0.5f64.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::{root_key, StreamRng};

    fn cloud(points: Vec<Vec<f64>>) -> PointCloud {
        let d = points[0].len();
        PointCloud::from_points(points, vec![0.0; d])
    }

    fn uniform_square(n: usize) -> PointCloud {
        let mut rng = StreamRng::new(root_key(3));
        cloud((0..n).map(|_| vec![rng.uniform(), rng.uniform()]).collect())
    }

    #[test]
    fn trivial_counts() {
        let c = cloud(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(box_count(&c, 0.6).unwrap().count, 4);
        let one = cloud(vec![vec![0.3, 0.7]]);
        for r in [1e-6, 0.1, 10.0] {
            assert_eq!(box_count(&one, r).unwrap().count, 1);
        }
        assert!(box_count(&one, 0.0).is_err());
    }

    #[test]
    fn square_counts_follow_area() {
        let c = uniform_square(1_000_000);
        let mut last = u64::MAX;
        for k in 1..=6 {
            let n = box_count(&c, 0.5f64.powi(k)).unwrap().count;
            let target = 4f64.powi(k);
            assert!(n as f64 <= 2.0 * target && n as f64 >= target / 2.0, "k={k} n={n}");
            assert!(n >= last || last == u64::MAX);
            last = n;
        }
    }

    #[test]
    fn known_dimensions() {
        let mut rng = StreamRng::new(root_key(4));
        let line = cloud((0..100_000).map(|_| vec![rng.uniform(), 0.5]).collect());
        let e = estimate_box_dimension(&line, &dyadic_radii(2, 8)).unwrap();
        assert!((e.slope - 1.0).abs() < 0.05, "{}", e.slope);
        let e = estimate_box_dimension(&uniform_square(400_000), &dyadic_radii(2, 7)).unwrap();
        assert!((e.slope - 2.0).abs() < 0.05, "{}", e.slope);
    }

    #[test]
    fn degenerate_and_short_schedules() {
        let one = cloud(vec![vec![0.3, 0.7]]);
        assert!(matches!(
            estimate_box_dimension(&one, &dyadic_radii(2, 8)),
            Err(Error::DegenerateFit(_))
        ));
        assert!(estimate_box_dimension(&one, &dyadic_radii(2, 4)).is_err());
    }

    #[test]
    fn grid_ball_sandwich() {
        // Greedy r-net as a stand-in for the ball count.
        let c = uniform_square(20_000);
        let r = 0.05;
        let grid = box_count(&c, r).unwrap().count as f64;
        let mut centers: Vec<&Vec<f64>> = Vec::new();
        for p in &c.points {
            if !centers.iter().any(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() <= r) {
                centers.push(p);
            }
        }
        let greedy = centers.len() as f64;
        assert!(grid <= 9.0 * greedy);
        assert!(greedy <= 9.0 * grid);
    }
}
