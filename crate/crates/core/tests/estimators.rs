//! Estimator trends on the presets and on a system with s₀ > 2.

use std::sync::Arc;

use sponge_core::dimension::solve_s0;
use sponge_core::estimator::{cylinder_cover_bound, lebesgue_positivity_probe, sample_cloud, PointCloud};
use sponge_core::keys::{self, root_key};
use sponge_core::presets;
use sponge_core::render::{black_pixels, render_cloud_ppm};
use sponge_core::rifs::{RealizationTree, SpongeSpec};

fn positive_area() -> SpongeSpec {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/positive-area.json")).unwrap();
    SpongeSpec::from_json(&text).unwrap()
}

fn cloud(spec: &SpongeSpec, seed: u64, points: usize) -> PointCloud {
    let tree = RealizationTree::realize(spec, seed);
    sample_cloud(&tree, points, 14, &keys::derive(&root_key(seed), b"cloud", 0)).unwrap()
}

fn volumes(spec: &SpongeSpec, c: &PointCloud) -> Vec<f64> {
    let bbox = spec.invariant_box();
    (4..=7)
        .map(|k| lebesgue_positivity_probe(&bbox, c, 0.5f64.powi(k)).unwrap().estimate)
        .collect()
}

#[test]
fn four_corner_volume_decreases_with_the_mesh() {
    let spec = presets::four_corner();
    let v = volumes(&spec, &cloud(&spec, 1, 100_000));
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    assert!(v[3] < 0.5 * v[0], "{v:?}");
}

#[test]
fn positive_area_volume_stabilizes() {
    let spec = positive_area();
    assert!(solve_s0(&spec, 1e-10).unwrap().s_star > 2.0);
    let v = volumes(&spec, &cloud(&spec, 1, 100_000));
    assert!(v.iter().all(|x| *x > 0.9), "{v:?}");
    assert!(v[3] > 0.95 * v[0], "{v:?}");
}

#[test]
fn cloud_raster_is_reproducible() {
    let spec = presets::mod_four_corner();
    let a = render_cloud_ppm(&cloud(&spec, 5, 100_000), &spec.invariant_box(), 512).unwrap();
    let b = render_cloud_ppm(&cloud(&spec, 5, 100_000), &spec.invariant_box(), 512).unwrap();
    assert!(black_pixels(&a) > 0);
    assert_eq!(a, b);
}

#[test]
fn cover_bound_shrinks_as_n_grows() {
    // Above s₀ the median of A_n·ᾱ^{ns} over realizations decreases in n.
    for spec in presets::all() {
        let s = solve_s0(&spec, 1e-10).unwrap().s_star + 0.1;
        let arc = Arc::new(spec.clone());
        let median = |n: usize| {
            let mut v: Vec<f64> = (0..20)
                .map(|seed| cylinder_cover_bound(&RealizationTree::new(arc.clone(), seed), n, s, 1 << 30).unwrap().scaled)
                .collect();
            v.sort_by(f64::total_cmp);
            v[10]
        };
        let m: Vec<f64> = [8, 12, 16].iter().map(|&n| median(n)).collect();
        assert!(m[0] > m[1] && m[1] > m[2], "{:?} {m:?}", spec.name);
    }
}
