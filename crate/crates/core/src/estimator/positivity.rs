use serde::Serialize;

use super::boxcount::grid_cells;
use super::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::rifs::BoundingBox;

#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub h: f64,
    pub hits: u64,
    pub cells: u64,
    pub fraction: f64,
    pub box_volume: f64,
    /// `fraction · box_volume`.
    pub estimate: f64,
}

/// Fraction of mesh-`h` cells of `bbox` hit by the cloud, times the box
/// volume. The grid is anchored at the lower corner of `bbox`.
pub fn lebesgue_positivity_probe(bbox: &BoundingBox, cloud: &PointCloud, h: f64) -> Result<PositivityReport> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("mesh must be positive, got {h}")));
    }
    let per_axis: Vec<i64> = (0..bbox.dim()).map(|k| (bbox.width(k) / h).ceil().max(1.0) as i64).collect();
    let cells: u64 = per_axis.iter().map(|&c| c as u64).product();
    let hits = grid_cells(&cloud.points, &bbox.lo, h)
        .into_iter()
        .filter(|c| c.iter().zip(&per_axis).all(|(i, n)| *i >= 0 && i < n))
        .count() as u64;
    let fraction = hits as f64 / cells as f64;
    let box_volume = bbox.volume();
    Ok(PositivityReport {
        h,
        hits,
        cells,
        fraction,
        box_volume,
        estimate: fraction * box_volume,
    })
}
