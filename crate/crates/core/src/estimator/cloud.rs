use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::keys::{self, Key, StreamRng};
use crate::rifs::{BoundingBox, RealizationTree};

/// Sampled points of one realization.
#[derive(Clone, Debug, Serialize)]
pub struct PointCloud {
    pub d: usize,
    pub points: Vec<Vec<f64>>,
    /// Per-axis error radius shared by all points.
    pub error_radius: Vec<f64>,
    /// Grid anchor for box counting.
    pub origin: Vec<f64>,
    pub seed: u64,
    pub depth: usize,
    pub count: usize,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec<f64>>, error_radius: Vec<f64>) -> Self {
        let d = error_radius.len();
        let count = points.len();
        let mut c = PointCloud {
            d,
            points,
            error_radius,
            origin: vec![0.0; d],
            seed: 0,
            depth: 0,
            count,
        };
        c.origin = c.hull().lo;
        c
    }

    pub fn max_error(&self) -> f64 {
        self.error_radius.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest axis-aligned box containing all points.
    pub fn hull(&self) -> BoundingBox {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for p in &self.points {
            for k in 0..self.d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        BoundingBox { lo, hi }
    }
}

/// `count` points `Π(w)` at truncation `depth`, with the letters of `w`
/// drawn uniformly; point `i` uses the stream `derive(key, "point", i)`.
pub fn sample_cloud(tree: &RealizationTree, count: usize, depth: usize, key: &Key) -> Result<PointCloud> {
    let n = tree.spec().n as u64;
    let points: Vec<Vec<f64>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamRng::new(keys::derive(key, b"point", i));
            let mut c = tree.root();
            for _ in 0..depth {
                let l = 1 + (rng.uniform() * n as f64) as u8;
                let table = tree.children(&c)?;
                c = tree.step(&c, &table, l.min(n as u8));
            }
            let tail = (1 + (rng.uniform() * n as f64) as u8).min(n as u8);
            Ok(c.fixed_point_image(tree.spec(), tail))
        })
        .collect::<Result<_>>()?;
    Ok(PointCloud {
        d: tree.spec().d,
        points,
        error_radius: tree.error_radius(depth),
        origin: tree.spec().bounding_box().lo,
        seed: tree.seed(),
        depth,
        count,
    })
}
