//! Cross-module invariants on the bundled presets.

use std::sync::Arc;

use proptest::prelude::*;
use sponge_core::dimension::solve_sn;
use sponge_core::estimator::sample_cloud;
use sponge_core::keys::{self, root_key};
use sponge_core::measure::{martingale_below, simulate_martingale, weights_from_dimension, MartingaleConfig};
use sponge_core::presets;
use sponge_core::rifs::{RealizationTree, SpongeSpec};
use sponge_core::stats::ks_two_sample;
use sponge_core::symbolic::{level_iter, Word};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn sampling_ignores_worker_count() {
    for spec in presets::all() {
        let tree = RealizationTree::realize(&spec, 9);
        let key = keys::derive(&root_key(9), b"cloud", 0);
        let a = pool(1).install(|| sample_cloud(&tree, 2000, 10, &key).unwrap());
        let b = pool(4).install(|| sample_cloud(&tree, 2000, 10, &key).unwrap());
        assert_eq!(a.points, b.points);
    }
}

#[test]
fn martingale_ignores_worker_count() {
    let spec = presets::four_corner();
    let sub = spec.subsystem(1).unwrap();
    let fam = weights_from_dimension(&sub, &solve_sn(&spec, &sub, 1e-12).unwrap()).unwrap();
    let cfg = MartingaleConfig::new(2, 200);
    let a = pool(1).install(|| simulate_martingale(&fam, &spec, 4, &cfg).unwrap());
    let b = pool(3).install(|| simulate_martingale(&fam, &spec, 4, &cfg).unwrap());
    assert_eq!(a.trial_values, b.trial_values);
}

/// Every projection of the subtree at `j` that starts with the escape block
/// stays at least the separation constant away from `t_{ℓ_k}` on axis `k`.
fn check_separation(spec: &SpongeSpec, tree: &RealizationTree, max_len: usize) {
    let c = spec.separation_constant();
    let pp = spec.escape_lengths();
    let b = spec.bounding_box();
    for len in 0..=max_len {
        for w in level_iter(spec.n, len) {
            let base = tree.descend(&w).unwrap();
            for k in 0..spec.d {
                let block = Word::repeat(spec.separated_index[k], pp[k]);
                let end = tree.descend_from(&base, block.letters()).unwrap();
                let scale = end.cum[k] / base.cum[k];
                let shift = (end.offset[k] - base.offset[k]) / base.cum[k];
                let (u, v) = (scale * b.lo[k] + shift, scale * b.hi[k] + shift);
                let t = spec.translation(spec.smooth_index[k], k);
                let dist = if t < u.min(v) { u.min(v) - t } else if t > u.max(v) { t - u.max(v) } else { 0.0 };
                assert!(dist >= c[k] - 1e-12, "{w} axis {k}: {dist} < {}", c[k]);
            }
        }
    }
}

#[test]
fn separation_constant_holds_on_sampled_realizations() {
    for spec in presets::all() {
        let arc = Arc::new(spec.clone());
        let max_len = if spec.n == 3 { 6 } else { 5 };
        for seed in 0..100 {
            check_separation(&spec, &RealizationTree::new(arc.clone(), seed), max_len);
        }
    }
}

#[test]
fn siblings_share_the_martingale_law() {
    let spec = presets::four_corner();
    let sub = spec.subsystem(1).unwrap();
    let fam = weights_from_dimension(&sub, &solve_sn(&spec, &sub, 1e-12).unwrap()).unwrap();
    let arc = Arc::new(spec.clone());
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for seed in 0..600 {
        let tree = RealizationTree::new(arc.clone(), seed);
        let kids = fam.super_children(&tree, &tree.root()).unwrap();
        a.push(martingale_below(&fam, &tree, &kids[0].0, 1).unwrap()[0]);
        b.push(martingale_below(&fam, &tree, &kids[kids.len() - 1].0, 1).unwrap()[0]);
    }
    let (d, crit) = ks_two_sample(&a, &b, 0.01);
    assert!(d < crit, "KS {d} >= {crit}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn json_round_trip(which in 0usize..3) {
        let spec = presets::by_name(presets::NAMES[which]).unwrap();
        prop_assert_eq!(SpongeSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn projections_factor_through_the_common_prefix(
        seed in any::<u64>(),
        prefix in prop::collection::vec(1u8..=4, 0..6),
        a in prop::collection::vec(1u8..=4, 1..8),
        b in prop::collection::vec(1u8..=4, 1..8),
    ) {
        prop_assume!(a[0] != b[0]);
        let spec = presets::four_corner();
        let tree = RealizationTree::realize(&spec, seed);
        let h = Word::from_letters(&prefix);
        let base = tree.descend(&h).unwrap();
        let tail = sponge_core::symbolic::InfiniteWord::periodic(Word::from_letters(&[1])).unwrap();
        let full = |w: &[u8]| {
            let word = Word::from_letters(&prefix.iter().chain(w).copied().collect::<Vec<u8>>());
            tree.project(&word, &tail, 12 + prefix.len()).unwrap().0
        };
        let local = |w: &[u8]| tree.project_from(&base, &Word::from_letters(w), &tail, 12).unwrap().0;
        let (pa, pb, la, lb) = (full(&a), full(&b), local(&a), local(&b));
        for k in 0..2 {
            let lhs = (pa[k] - pb[k]).abs();
            let rhs = base.cum[k].abs() * (la[k] - lb[k]).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300), "{} vs {}", lhs, rhs);
        }
    }
}
