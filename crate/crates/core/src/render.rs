//! SVG iterates and PPM point rasters.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::PointCloud;
use crate::rifs::{BoundingBox, Cursor, RealizationTree};
use crate::symbolic::Word;

/// Default cap on the number of primitives in one scene.
pub const PRIMITIVE_CAP: u64 = 1 << 20;

const WIDTH: f64 = 800.0;
const ROW: f64 = 24.0;
const BAR: f64 = 14.0;

#[derive(Clone, Debug, Serialize)]
pub struct Primitive {
    pub level: usize,
    pub word: Word,
    /// Image of the viewport under the cylinder map.
    pub rect: BoundingBox,
}

#[derive(Clone, Debug, Serialize)]
pub struct Scene {
    pub d: usize,
    pub levels: usize,
    pub viewport: BoundingBox,
    pub primitives: Vec<Primitive>,
}

impl Scene {
    pub fn level(&self, m: usize) -> impl Iterator<Item = &Primitive> {
        self.primitives.iter().filter(move |p| p.level == m)
    }
}

/// Cylinder images of the invariant box for levels `0..=levels`, in
/// lexicographic order within each level.
pub fn iterate_scene(tree: &RealizationTree, levels: usize, cap: u64) -> Result<Scene> {
    let spec = tree.spec();
    let n = spec.n as u128;
    let total: u128 = (0..=levels as u32).map(|m| n.saturating_pow(m)).fold(0u128, |a, b| a.saturating_add(b));
    if total > cap as u128 {
        return Err(Error::Budget {
            what: "render primitives",
            requested: total,
            cap: cap as u128,
        });
    }
    let viewport = spec.invariant_box();
    let mut primitives = Vec::with_capacity(total as usize);
    let mut frontier: Vec<Cursor> = vec![tree.root()];
    for level in 0..=levels {
        for c in &frontier {
            primitives.push(Primitive {
                level,
                word: c.word.clone(),
                rect: c.rect(&viewport),
            });
        }
        if level == levels {
            break;
        }
        let mut next = Vec::with_capacity(frontier.len() * spec.n);
        for c in &frontier {
            let table = tree.children(c)?;
            for j in 1..=spec.n as u8 {
                next.push(tree.step(c, &table, j));
            }
        }
        frontier = next;
    }
    Ok(Scene {
        d: spec.d,
        levels,
        viewport,
        primitives,
    })
}

/// SVG of the scene: nested rectangles for `d = 2`, one row of intervals
/// per level for `d = 1`. Each level sits in its own `<g class="level-m">`.
pub fn scene_svg(scene: &Scene) -> Result<String> {
    let vp = &scene.viewport;
    let sx = WIDTH / vp.width(0);
    let (height, shade) = match scene.d {
        1 => (ROW * (scene.levels + 1) as f64, 0.0),
        2 => (WIDTH * vp.width(1) / vp.width(0), 1.0 / (scene.levels + 1) as f64),
        d => return Err(Error::Dimension { expected: 2, got: d }),
    };
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH:.6}" height="{height:.6}" viewBox="0 0 {WIDTH:.6} {height:.6}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{WIDTH:.6}" height="{height:.6}" fill="white"/>"#).unwrap();
    for m in 0..=scene.levels {
        let grey = if scene.d == 2 {
            (255.0 * (1.0 - shade * (m + 1) as f64)).round() as u8
        } else {
            0
        };
        writeln!(out, r#"<g class="level-{m}" fill="rgb({grey},{grey},{grey})" stroke="none">"#).unwrap();
        for p in scene.level(m) {
            let x = (p.rect.lo[0] - vp.lo[0]) * sx;
            let w = p.rect.width(0) * sx;
            let (y, h) = if scene.d == 1 {
                (m as f64 * ROW + (ROW - BAR) / 2.0, BAR)
            } else {
                ((vp.hi[1] - p.rect.hi[1]) * sx, p.rect.width(1) * sx)
            };
            writeln!(out, r#"<rect x="{x:.6}" y="{y:.6}" width="{w:.6}" height="{h:.6}"/>"#).unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

/// `render_iterates` in SVG form.
pub fn render_iterates_svg(tree: &RealizationTree, levels: usize, cap: u64) -> Result<String> {
    scene_svg(&iterate_scene(tree, levels, cap)?)
}

/// Pixel of `x` in a `res × res` raster over `viewport`, row 0 at the top.
fn pixel(viewport: &BoundingBox, res: usize, x: &[f64]) -> Option<(usize, usize)> {
    let mut ij = [0usize; 2];
    for k in 0..2 {
        let u = (x[k] - viewport.lo[k]) / viewport.width(k);
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        ij[k] = ((u * res as f64) as usize).min(res - 1);
    }
    Some((res - 1 - ij[1], ij[0]))
}

/// Binary P6 raster of a planar cloud: white background, black hits.
pub fn render_cloud_ppm(cloud: &PointCloud, viewport: &BoundingBox, res: usize) -> Result<Vec<u8>> {
    if cloud.d != 2 || viewport.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: cloud.d });
    }
    if res == 0 {
        return Err(Error::Argument("resolution must be positive".into()));
    }
    let header = format!("P6\n{res} {res}\n255\n");
    let mut out = header.into_bytes();
    let start = out.len();
    out.resize(start + 3 * res * res, 255);
    for p in &cloud.points {
        if let Some((row, col)) = pixel(viewport, res, p) {
            let at = start + 3 * (row * res + col);
            out[at..at + 3].fill(0);
        }
    }
    Ok(out)
}

/// Number of black pixels in a P6 image produced by [`render_cloud_ppm`].
pub fn black_pixels(ppm: &[u8]) -> usize {
    let mut newlines = 0;
    let start = ppm
        .iter()
        .position(|&b| {
            newlines += (b == b'\n') as usize;
            newlines == 3
        })
        .map_or(ppm.len(), |i| i + 1);
    ppm[start..].chunks(3).filter(|c| c.iter().all(|&b| b == 0)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    #[test]
    fn level_zero_is_the_box() {
        let spec = presets::four_corner();
        let tree = RealizationTree::realize(&spec, 1);
        let s = iterate_scene(&tree, 0, PRIMITIVE_CAP).unwrap();
        assert_eq!(s.primitives.len(), 1);
        assert_eq!(s.primitives[0].rect, spec.invariant_box());
    }

    #[test]
    fn four_corner_level_two_is_disjoint() {
        let tree = RealizationTree::realize(&presets::four_corner(), 7);
        let s = iterate_scene(&tree, 2, PRIMITIVE_CAP).unwrap();
        let lv: Vec<_> = s.level(2).collect();
        assert_eq!(lv.len(), 16);
        for (a, p) in lv.iter().enumerate() {
            for q in &lv[a + 1..] {
                assert!(!p.rect.overlaps(&q.rect), "{} {}", p.word, q.word);
            }
        }
    }

    #[test]
    fn line_segments_nest() {
        let tree = RealizationTree::realize(&presets::example_line(), 2);
        let s = iterate_scene(&tree, 5, PRIMITIVE_CAP).unwrap();
        assert_eq!(s.level(5).count(), 243);
        let svg = scene_svg(&s).unwrap();
        assert_eq!(svg.matches("<rect ").count(), 1 + (0..=5).map(|m| 3usize.pow(m)).sum::<usize>());
        assert!(svg.contains(r#"<g class="level-5""#));
    }

    #[test]
    fn budget_is_enforced() {
        let tree = RealizationTree::realize(&presets::four_corner(), 1);
        let e = iterate_scene(&tree, 12, PRIMITIVE_CAP).unwrap_err();
        assert_eq!(e.kind(), crate::ErrorKind::Budget);
    }

    fn unit() -> BoundingBox {
        BoundingBox { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }
    }

    #[test]
    fn empty_cloud_is_white() {
        let cloud = PointCloud::from_points(vec![], vec![0.0, 0.0]);
        let img = render_cloud_ppm(&cloud, &unit(), 8).unwrap();
        assert!(img.starts_with(b"P6\n8 8\n255\n"));
        assert_eq!(img.len(), 11 + 3 * 64);
        assert_eq!(black_pixels(&img), 0);
    }

    #[test]
    fn centre_point_is_one_pixel() {
        let cloud = PointCloud::from_points(vec![vec![0.5, 0.5]], vec![0.0, 0.0]);
        let img = render_cloud_ppm(&cloud, &unit(), 9).unwrap();
        assert_eq!(black_pixels(&img), 1);
        let at = 11 + 3 * (4 * 9 + 4);
        assert_eq!(&img[at..at + 3], &[0, 0, 0]);
    }

    #[test]
    fn line_cloud_is_rejected() {
        let cloud = PointCloud::from_points(vec![vec![0.5]], vec![0.0]);
        let e = render_cloud_ppm(&cloud, &unit(), 4).unwrap_err();
        assert!(matches!(e, Error::Dimension { expected: 2, got: 1 }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn iterates_nest_and_count(seed in any::<u64>(), which in 0usize..3) {
            let spec = presets::by_name(presets::NAMES[which]).unwrap();
            let tree = RealizationTree::realize(&spec, seed);
            let s = iterate_scene(&tree, 4, PRIMITIVE_CAP).unwrap();
            for m in 0..=4 {
                prop_assert_eq!(s.level(m).count(), spec.n.pow(m as u32));
            }
            for p in s.primitives.iter().filter(|p| p.level > 0) {
                let parent = s.level(p.level - 1).find(|q| q.word == p.word.prefix_word(p.level - 1)).unwrap();
                prop_assert!(parent.rect.contains_box(&p.rect, 1e-12));
            }
        }
    }
}
