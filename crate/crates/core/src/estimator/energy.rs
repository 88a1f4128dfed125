//! Truncated `t`-energy `∬ |Π(𝚒) − Π(𝚓)|^{−t} dν(𝚒) dν(𝚓)` of the
//! weight-proportional descent measure `ν` on `Γ_n`.
//!
//! Pairs are stratified by the super-level `b` at which they split: for a
//! fixed tree the mass of stratum `b` is `Σ_{|h|=b} ν(h)² (1 − Σ_j ν_j(h)²)`,
//! estimated by drawing `h ~ ν` and weighting with `ν(h)(1 − Σ_j ν_j(h)²)`.
//! Pairs that agree down to the truncation depth sit at the floor.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::keys::{self, Key, StreamRng};
use crate::measure::WeightFamily;
use crate::rifs::{Cursor, RealizationTree};
use crate::stats::summarize;

#[derive(Clone, Debug, Serialize)]
pub struct EnergyStratum {
    /// Split super-level.
    pub level: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyEstimate {
    pub t: f64,
    /// Truncation depth in letters.
    pub depth: usize,
    pub levels: usize,
    /// Samples per stratum.
    pub pairs: usize,
    /// Distances are clipped below at `2·|error radius|`.
    pub floor: f64,
    pub value: f64,
    pub stderr: f64,
    pub diagonal: f64,
    pub strata: Vec<EnergyStratum>,
}

/// Normalized weights of the super-children of `at`.
fn normalized(family: &WeightFamily, tree: &RealizationTree, at: &Cursor) -> Result<Vec<(Cursor, f64)>> {
    let mut kids = family.super_children(tree, at)?;
    let total: f64 = kids.iter().map(|k| k.1).sum();
    for k in kids.iter_mut() {
        k.1 /= total;
    }
    Ok(kids)
}

fn choose(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u * total < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Descends `levels` super-levels by weight; returns the end and `ν` of
/// the path.
fn descend(family: &WeightFamily, tree: &RealizationTree, start: Cursor, levels: usize, key: &Key) -> Result<(Cursor, f64)> {
    let mut at = start;
    let mut nu = 1.0;
    for level in 0..levels {
        let kids = normalized(family, tree, &at)?;
        let u = StreamRng::new(keys::derive(key, b"descent", level as u64)).uniform();
        let w: Vec<f64> = kids.iter().map(|k| k.1).collect();
        let i = choose(&w, u);
        nu *= w[i];
        at = kids.into_iter().nth(i).unwrap().0;
    }
    Ok((at, nu))
}

/// One sample of stratum `b`: weight `ν(h)(1 − Σν_j²)` and the distance.
fn stratum_sample(
    family: &WeightFamily,
    tree: &RealizationTree,
    b: usize,
    levels: usize,
    key: &Key,
) -> Result<(f64, f64)> {
    let (h, nu_h) = descend(family, tree, tree.root(), b, &keys::derive(key, b"prefix", 0))?;
    let kids = normalized(family, tree, &h)?;
    let w: Vec<f64> = kids.iter().map(|k| k.1).collect();
    let collision: f64 = w.iter().map(|x| x * x).sum();
    let mut rng = StreamRng::new(keys::derive(key, b"split", 0));
    let first: Vec<f64> = w.iter().map(|x| x * (1.0 - x)).collect();
    let i = choose(&first, rng.uniform());
    let mut second = w.clone();
    second[i] = 0.0;
    let j = choose(&second, rng.uniform());
    let rest = levels - b - 1;
    let (a, _) = descend(family, tree, kids[i].0.clone(), rest, &keys::derive(key, b"left", 0))?;
    let (c, _) = descend(family, tree, kids[j].0.clone(), rest, &keys::derive(key, b"right", 0))?;
    let spec = tree.spec();
    let pa = a.fixed_point_image(spec, 1);
    let pc = c.fixed_point_image(spec, 1);
    let dist = pa.iter().zip(&pc).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok((nu_h * (1.0 - collision), dist))
}

/// Estimates for several exponents from one set of sampled pairs.
pub fn energy_profile(
    family: &WeightFamily,
    tree: &RealizationTree,
    ts: &[f64],
    pairs: usize,
    depth: usize,
    key: &Key,
) -> Result<Vec<EnergyEstimate>> {
    let q = family.q();
    if depth == 0 || !depth.is_multiple_of(q) {
        return Err(Error::Argument(format!("depth {depth} must be a positive multiple of q = {q}")));
    }
    if pairs < 2 || ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::Argument("need at least two pairs per stratum and finite exponents".into()));
    }
    let levels = depth / q;
    let floor = 2.0 * tree.error_radius(depth).iter().map(|r| r * r).sum::<f64>().sqrt();
    let jobs: Vec<(usize, usize)> = (0..levels).flat_map(|b| (0..pairs).map(move |m| (b, m))).collect();
    let samples: Vec<(f64, f64)> = jobs
        .into_par_iter()
        .map(|(b, m)| stratum_sample(family, tree, b, levels, &keys::derive(key, b"stratum", (b * pairs + m) as u64)))
        .collect::<Result<_>>()?;
    let diag: Vec<f64> = (0..pairs)
        .into_par_iter()
        .map(|m| descend(family, tree, tree.root(), levels, &keys::derive(key, b"diagonal", m as u64)).map(|x| x.1))
        .collect::<Result<_>>()?;
    let diag_mass = summarize(&diag);

    Ok(ts
        .iter()
        .map(|&t| {
            let mut strata = Vec::with_capacity(levels);
            let mut var = 0.0;
            let mut value = 0.0;
            for (b, chunk) in samples.chunks(pairs).enumerate() {
                let v: Vec<f64> = chunk.iter().map(|(w, dist)| w * dist.max(floor).powf(-t)).collect();
                let s = summarize(&v);
                value += s.mean;
                var += s.stderr * s.stderr;
                strata.push(EnergyStratum {
                    level: b,
                    mean: s.mean,
                    stderr: s.stderr,
                });
            }
            let fp = floor.powf(-t);
            let diagonal = diag_mass.mean * fp;
            value += diagonal;
            var += (diag_mass.stderr * fp).powi(2);
            EnergyEstimate {
                t,
                depth,
                levels,
                pairs,
                floor,
                value,
                stderr: var.sqrt(),
                diagonal,
                strata,
            }
        })
        .collect())
}

/// Energy at one exponent; see [`energy_profile`].
pub fn energy_estimate(
    family: &WeightFamily,
    tree: &RealizationTree,
    t: f64,
    pairs: usize,
    depth: usize,
    key: &Key,
) -> Result<EnergyEstimate> {
    Ok(energy_profile(family, tree, &[t], pairs, depth, key)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::solve_sn;
    use crate::measure::weights_from_dimension;
    use crate::presets;

    fn family(n: usize) -> (crate::rifs::SpongeSpec, WeightFamily) {
        let spec = presets::example_line();
        let sub = spec.subsystem(n).unwrap();
        let rep = solve_sn(&spec, &sub, 1e-12).unwrap();
        (spec.clone(), weights_from_dimension(&sub, &rep).unwrap())
    }

    #[test]
    fn zero_exponent_integrates_to_one() {
        // With t = 0 the integrand is 1 and the strata plus the diagonal
        // carry the whole product mass.
        let (spec, fam) = family(1);
        let tree = RealizationTree::realize(&spec, 4);
        let e = energy_estimate(&fam, &tree, 0.0, 400, 3 * fam.q(), &keys::root_key(1)).unwrap();
        assert!((e.value - 1.0).abs() < 4.0 * e.stderr + 1e-9, "{e:?}");
    }

    #[test]
    fn deterministic_given_key() {
        let (spec, fam) = family(1);
        let tree = RealizationTree::realize(&spec, 4);
        let a = energy_estimate(&fam, &tree, 0.5, 20, 2 * fam.q(), &keys::root_key(3)).unwrap();
        let b = energy_estimate(&fam, &tree, 0.5, 20, 2 * fam.q(), &keys::root_key(3)).unwrap();
        assert_eq!(a.value, b.value);
        assert!(energy_estimate(&fam, &tree, 0.5, 20, fam.q() + 1, &keys::root_key(3)).is_err());
    }

    #[test]
    fn floor_is_reported() {
        let (spec, fam) = family(1);
        let tree = RealizationTree::realize(&spec, 4);
        let e = energy_estimate(&fam, &tree, 0.5, 4, 2 * fam.q(), &keys::root_key(3)).unwrap();
        let r = tree.error_radius(2 * fam.q())[0];
        assert!((e.floor - 2.0 * r).abs() < 1e-15);
    }
}
