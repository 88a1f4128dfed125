//! Martingale random measures on the super-alphabet `𝒥_n`.
//!
//! One super-letter is a whole block `𝚓 = 𝚒·suffix` of length `q_n`. The
//! weight of super-child `𝚓` below a node is the product of the per-level
//! factors `φ_σ^{s_n}(A)` over its `q_n` letters, i.e. the ratio
//! `φ̄(𝚒𝚓)/φ̄(𝚒)` of cumulative singular value functions.

use rayon::prelude::*;
use serde::Serialize;

use crate::dimension::{DimensionReport, PermutationWeights};
use crate::error::{Error, Result};
use crate::keys::{self, Key, StreamRng};
use crate::rifs::{Cursor, RealizationTree};
use crate::stats::{linear_fit, summarize};
use crate::symbolic::{SubsystemSpec, Word};

/// Largest solver tolerance accepted when building weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct WeightFamily {
    pub sub: SubsystemSpec,
    pub weights: PermutationWeights,
    #[serde(skip)]
    suffix: Word,
}

impl WeightFamily {
    pub fn new(sub: SubsystemSpec, sigma: Vec<usize>, s: f64) -> Self {
        let suffix = sub.suffix();
        WeightFamily {
            sub,
            weights: PermutationWeights::new(sigma, s),
            suffix,
        }
    }

    pub fn q(&self) -> usize {
        self.sub.q()
    }

    pub fn s(&self) -> f64 {
        self.weights.s
    }

    /// Number of tree steps needed to expand one super-node.
    pub fn steps_per_node(&self) -> u128 {
        let a = self.sub.alphabet as u128;
        let free: u128 = (1..=self.sub.n as u32).map(|i| a.pow(i)).sum();
        free + a.pow(self.sub.n as u32) * self.suffix.len() as u128
    }

    /// Super-children of `parent` in lexicographic order, with weights.
    pub fn super_children(&self, tree: &RealizationTree, parent: &Cursor) -> Result<Vec<(Cursor, f64)>> {
        let mut out = Vec::with_capacity(self.sub.size() as usize);
        self.expand_free(tree, parent, 1.0, 0, &mut out)?;
        Ok(out)
    }

    fn expand_free(
        &self,
        tree: &RealizationTree,
        at: &Cursor,
        weight: f64,
        depth: usize,
        out: &mut Vec<(Cursor, f64)>,
    ) -> Result<()> {
        if depth == self.sub.n {
            let (c, w) = self.walk(tree, at, weight, self.suffix.letters())?;
            out.push((c, w));
            return Ok(());
        }
        let table = tree.children(at)?;
        for j in 1..=self.sub.alphabet as u8 {
            let c = tree.step(at, &table, j);
            let w = weight * self.weights.phi(table.child(j as usize - 1));
            self.expand_free(tree, &c, w, depth + 1, out)?;
        }
        Ok(())
    }

    fn walk(&self, tree: &RealizationTree, from: &Cursor, weight: f64, letters: &[u8]) -> Result<(Cursor, f64)> {
        let mut c = from.clone();
        let mut w = weight;
        for &l in letters {
            let table = tree.children(&c)?;
            w *= self.weights.phi(table.child(l as usize - 1));
            c = tree.step(&c, &table, l);
        }
        Ok((c, w))
    }

    /// Per-level factor `φ_σ^{s_n}` of child `letter` of the node with key
    /// `key`, sampling only the axes with a nonzero exponent.
    fn factor(&self, tree: &RealizationTree, key: &Key, letter: u8) -> Result<f64> {
        let mut f = 1.0;
        for (axis, &w) in self.weights.w.iter().enumerate() {
            if w != 0.0 {
                f *= tree.axis_vector(key, axis)?[letter as usize - 1].abs().powf(w);
            }
        }
        Ok(f)
    }

    /// Super-children of the node with key `key` as `(key, weight)` pairs.
    ///
    /// Same weights as [`WeightFamily::super_children`] for trees without
    /// overrides, without tracking positions. With `keys == false` the
    /// returned keys are not computed.
    pub fn super_weights(&self, tree: &RealizationTree, key: &Key, keys: bool) -> Result<Vec<(Key, f64)>> {
        let mut out = Vec::with_capacity(self.sub.size() as usize);
        self.weights_free(tree, key, 1.0, 0, keys, &mut out)?;
        Ok(out)
    }

    fn weights_free(
        &self,
        tree: &RealizationTree,
        key: &Key,
        weight: f64,
        depth: usize,
        want_keys: bool,
        out: &mut Vec<(Key, f64)>,
    ) -> Result<()> {
        if depth == self.sub.n {
            let mut k = *key;
            let mut w = weight;
            let last = self.suffix.len().saturating_sub(1);
            for (i, &l) in self.suffix.letters().iter().enumerate() {
                w *= self.factor(tree, &k, l)?;
                if want_keys || i < last {
                    k = keys::child_key(&k, l);
                }
            }
            out.push((k, w));
            return Ok(());
        }
        let mut factors = vec![1.0; self.sub.alphabet];
        for (axis, &w) in self.weights.w.iter().enumerate() {
            if w != 0.0 {
                let v = tree.axis_vector(key, axis)?;
                for (f, a) in factors.iter_mut().zip(&v) {
                    *f *= a.abs().powf(w);
                }
            }
        }
        for j in 1..=self.sub.alphabet as u8 {
            let c = keys::child_key(key, j);
            self.weights_free(tree, &c, weight * factors[j as usize - 1], depth + 1, want_keys, out)?;
        }
        Ok(())
    }

    /// `φ̄_σ^{s_n}(word)` as a product of per-level factors.
    pub fn phi_bar(&self, tree: &RealizationTree, word: &Word) -> Result<(Cursor, f64)> {
        self.walk(tree, &tree.root(), 1.0, word.letters())
    }

    /// Checks that `word` is a concatenation of `𝒥_n` blocks.
    pub fn check_gamma_word(&self, word: &Word) -> Result<()> {
        let q = self.q();
        if !word.len().is_multiple_of(q) {
            return Err(Error::Argument(format!("word length {} is not a multiple of q = {q}", word.len())));
        }
        word.validate(self.sub.alphabet)?;
        let n = self.sub.n;
        for b in word.letters().chunks(q) {
            if &b[n..] != self.suffix.letters() {
                return Err(Error::Argument(format!("word {word} does not address a subsystem cylinder")));
            }
        }
        Ok(())
    }

    /// Descends `levels` super-levels from `start`, choosing each
    /// super-child with probability proportional to its weight.
    pub fn descend_by_weight(&self, tree: &RealizationTree, start: &Cursor, levels: usize, key: &keys::Key) -> Result<Cursor> {
        let mut at = start.clone();
        for level in 0..levels {
            let kids = self.super_children(tree, &at)?;
            let u = StreamRng::new(keys::derive(key, b"descent", level as u64)).uniform();
            at = pick(kids, u).0;
        }
        Ok(at)
    }
}

fn pick<T>(kids: Vec<(T, f64)>, u: f64) -> (T, f64) {
    let total: f64 = kids.iter().map(|k| k.1).sum();
    let target = u * total;
    let mut acc = 0.0;
    let last = kids.len() - 1;
    for (i, k) in kids.into_iter().enumerate() {
        acc += k.1;
        if target < acc || i == last {
            return (k.0, total);
        }
    }
    unreachable!()
}

/// Weights `p_𝚓 = φ̄_σ^{s_n}(𝚒𝚓)/φ̄_σ^{s_n}(𝚒)` for the permutation and
/// exponent of a subsystem solve.
pub fn weights_from_dimension(sub: &SubsystemSpec, report: &DimensionReport) -> Result<WeightFamily> {
    if report.tolerance > WEIGHT_TOLERANCE {
        return Err(Error::Argument(format!(
            "weights need a solve at tolerance <= {WEIGHT_TOLERANCE:e}, got {:e}",
            report.tolerance
        )));
    }
    Ok(WeightFamily::new(sub.clone(), report.sigma(), report.s_star))
}

#[derive(Clone, Debug)]
pub struct MartingaleConfig {
    /// Super-levels `K`; statistics are reported for `X_1..X_K`.
    pub depth: usize,
    pub trials: usize,
    /// Per-trial step count above which weighted descent replaces exact
    /// enumeration.
    pub enumeration_cap: u128,
    /// Cap on total tree steps over all trials.
    pub compute_cap: u128,
}

impl MartingaleConfig {
    pub fn new(depth: usize, trials: usize) -> Self {
        MartingaleConfig {
            depth,
            trials,
            enumeration_cap: 1_000_000,
            compute_cap: 50_000_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelStats {
    pub k: usize,
    pub mean: f64,
    pub var: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    /// Empirical `E(X_k²)` and its standard error.
    pub mean_sq: f64,
    pub mean_sq_stderr: f64,
}

/// Moments of the first-generation weights.
#[derive(Clone, Debug, Serialize)]
pub struct WeightMoments {
    /// `E(Σ p_j)`.
    pub sum: f64,
    pub sum_stderr: f64,
    /// `E(Σ p_j²)`.
    pub sum_sq: f64,
    pub sum_sq_stderr: f64,
    /// `E(Σ_j Σ_k p_j p_k) = E((Σ p_j)²)`.
    pub pair_sum: f64,
    pub pair_sum_stderr: f64,
}

impl WeightMoments {
    /// `E(ΣΣ p_j p_k − 1)/(1 − E(Σ p_j²))`, or `None` when `E(Σ p_j²) ≥ 1`.
    pub fn l2_bound(&self) -> Option<f64> {
        (self.sum_sq < 1.0).then(|| (self.pair_sum - 1.0) / (1.0 - self.sum_sq))
    }

    /// Exact `E(X_k²) = 1 + E(ΣΣ p_j p_k − 1)·Σ_{i<k} E(Σ p_j²)^i`, assuming
    /// `E(Σ p_j) = 1`.
    pub fn second_moment(&self, k: usize) -> f64 {
        let geometric: f64 = (0..k).map(|i| self.sum_sq.powi(i as i32)).sum();
        1.0 + (self.pair_sum - 1.0) * geometric
    }
}

/// Least-squares check of `E(X_{k+1} | X_k) = X_k`.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleRegression {
    pub k: usize,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub intercept_stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub n: usize,
    pub q: usize,
    pub s_n: f64,
    pub permutation: Vec<usize>,
    pub depth: usize,
    pub trials: usize,
    pub seed: u64,
    /// `"exact"` or `"descent"`.
    pub mode: &'static str,
    pub levels: Vec<LevelStats>,
    pub weights: WeightMoments,
    pub l2_bound: Option<f64>,
    pub regressions: Vec<MartingaleRegression>,
    /// `X_1..X_K` per trial.
    #[serde(skip)]
    pub trial_values: Vec<Vec<f64>>,
}

/// `[X_0, X_1, .., X_m]` below `node`.
fn exact_partial_sums(family: &WeightFamily, tree: &RealizationTree, node: &Cursor, m: usize) -> Result<Vec<f64>> {
    if !tree.has_overrides() {
        return exact_sums_by_key(family, tree, node.key(), m);
    }
    let mut acc = vec![0.0; m + 1];
    acc[0] = 1.0;
    if m == 0 {
        return Ok(acc);
    }
    for (c, p) in family.super_children(tree, node)? {
        let sub = exact_partial_sums(family, tree, &c, m - 1)?;
        for (i, x) in sub.iter().enumerate() {
            acc[i + 1] += p * x;
        }
    }
    Ok(acc)
}

/// `X_1..X_m` of the martingale rooted at `node`, by exact enumeration.
pub fn martingale_below(family: &WeightFamily, tree: &RealizationTree, node: &Cursor, m: usize) -> Result<Vec<f64>> {
    Ok(exact_partial_sums(family, tree, node, m)?.split_off(1))
}

fn exact_sums_by_key(family: &WeightFamily, tree: &RealizationTree, key: &Key, m: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; m + 1];
    acc[0] = 1.0;
    if m == 0 {
        return Ok(acc);
    }
    for (k, p) in family.super_weights(tree, key, m > 1)? {
        let sub = exact_sums_by_key(family, tree, &k, m - 1)?;
        for (i, x) in sub.iter().enumerate() {
            acc[i + 1] += p * x;
        }
    }
    Ok(acc)
}

/// Steps needed to enumerate `levels` super-levels exactly.
fn exact_steps(family: &WeightFamily, levels: usize) -> u128 {
    let size = family.sub.size();
    let nodes: u128 = (0..levels as u32).map(|i| size.saturating_pow(i)).fold(0u128, |a, b| a.saturating_add(b));
    nodes.saturating_mul(family.steps_per_node())
}

struct Trial {
    xs: Vec<f64>,
    sum: f64,
    sum_sq: f64,
}

fn run_trial(family: &WeightFamily, tree: &RealizationTree, depth: usize, exact: bool) -> Result<Trial> {
    let root = *tree.root().key();
    let kids = family.super_weights(tree, &root, depth > 1)?;
    let sum: f64 = kids.iter().map(|k| k.1).sum();
    let sum_sq: f64 = kids.iter().map(|k| k.1 * k.1).sum();
    let xs = if exact {
        let mut acc = vec![0.0; depth];
        for (k, p) in kids {
            let sub = exact_sums_by_key(family, tree, &k, depth - 1)?;
            for i in 0..depth {
                acc[i] += p * sub[i];
            }
        }
        acc
    } else {
        // X̂_k = ∏ (Σ p) along a weight-proportional path; unbiased for X_k.
        let key = keys::derive(&root, b"martingale-descent", 0);
        let mut xs = Vec::with_capacity(depth);
        let mut x = sum;
        xs.push(x);
        let u = StreamRng::new(keys::derive(&key, b"descent", 0)).uniform();
        let mut at = pick(kids, u).0;
        for level in 1..depth {
            let kids = family.super_weights(tree, &at, level + 1 < depth)?;
            let u = StreamRng::new(keys::derive(&key, b"descent", level as u64)).uniform();
            let (next, total) = pick(kids, u);
            x *= total;
            xs.push(x);
            at = next;
        }
        xs
    };
    Ok(Trial { xs, sum, sum_sq })
}

/// Independent trials of `X_1..X_K` at the root of fresh trees.
///
/// Trial `t` uses the tree with seed `derive_seed(seed, "martingale", t)`.
pub fn simulate_martingale(
    family: &WeightFamily,
    spec: &crate::rifs::SpongeSpec,
    seed: u64,
    cfg: &MartingaleConfig,
) -> Result<MartingaleReport> {
    if cfg.depth == 0 || cfg.trials < 2 {
        return Err(Error::Argument("martingale needs depth >= 1 and at least two trials".into()));
    }
    let exact_cost = exact_steps(family, cfg.depth);
    let exact = exact_cost <= cfg.enumeration_cap;
    let per_trial = if exact {
        exact_cost
    } else {
        family.steps_per_node().saturating_mul(cfg.depth as u128)
    };
    let total = per_trial.saturating_mul(cfg.trials as u128);
    if total > cfg.compute_cap {
        return Err(Error::Budget {
            what: "martingale tree steps",
            requested: total,
            cap: cfg.compute_cap,
        });
    }
    let spec = std::sync::Arc::new(spec.clone());
    let trials: Vec<Trial> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let tree = RealizationTree::new(spec.clone(), keys::derive_seed(seed, b"martingale", t));
            run_trial(family, &tree, cfg.depth, exact)
        })
        .collect::<Result<_>>()?;

    let moment = |f: &dyn Fn(&Trial) -> f64| {
        let v: Vec<f64> = trials.iter().map(f).collect();
        summarize(&v)
    };
    let s1 = moment(&|t| t.sum);
    let s2 = moment(&|t| t.sum_sq);
    let s3 = moment(&|t| t.sum * t.sum);
    let weights = WeightMoments {
        sum: s1.mean,
        sum_stderr: s1.stderr,
        sum_sq: s2.mean,
        sum_sq_stderr: s2.stderr,
        pair_sum: s3.mean,
        pair_sum_stderr: s3.stderr,
    };
    let mut levels = Vec::with_capacity(cfg.depth);
    for k in 0..cfg.depth {
        let x = moment(&|t| t.xs[k]);
        let x2 = moment(&|t| t.xs[k] * t.xs[k]);
        levels.push(LevelStats {
            k: k + 1,
            mean: x.mean,
            var: x.var,
            stderr: x.stderr,
            min: x.min,
            max: x.max,
            mean_sq: x2.mean,
            mean_sq_stderr: x2.stderr,
        });
    }
    let mut regressions = Vec::new();
    for k in 1..cfg.depth {
        let a: Vec<f64> = trials.iter().map(|t| t.xs[k - 1]).collect();
        let b: Vec<f64> = trials.iter().map(|t| t.xs[k]).collect();
        if let Ok(f) = linear_fit(&a, &b) {
            regressions.push(MartingaleRegression {
                k,
                slope: f.slope,
                slope_stderr: f.slope_stderr,
                intercept: f.intercept,
                intercept_stderr: f.intercept_stderr,
            });
        }
    }
    Ok(MartingaleReport {
        n: family.sub.n,
        q: family.q(),
        s_n: family.s(),
        permutation: family.weights.sigma.iter().map(|a| a + 1).collect(),
        depth: cfg.depth,
        trials: cfg.trials,
        seed,
        mode: if exact { "exact" } else { "descent" },
        levels,
        l2_bound: weights.l2_bound(),
        weights,
        regressions,
        trial_values: trials.into_iter().map(|t| t.xs).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CylinderMeasure {
    pub word: String,
    pub phi_bar: f64,
    pub x_hat: f64,
    /// Super-levels used below the word.
    pub tail_depth: usize,
    pub value: f64,
}

/// `φ̄_σ^{s_n}(word)·X̂^{word}` with `X̂` the exact sum over `tail_depth`
/// super-levels below the word.
pub fn sample_cylinder_measure(
    family: &WeightFamily,
    tree: &RealizationTree,
    word: &Word,
    tail_depth: usize,
    cap: u128,
) -> Result<CylinderMeasure> {
    family.check_gamma_word(word)?;
    let cost = exact_steps(family, tail_depth);
    if cost > cap {
        return Err(Error::Budget {
            what: "cylinder measure tree steps",
            requested: cost,
            cap,
        });
    }
    let (cursor, phi_bar) = family.phi_bar(tree, word)?;
    let x_hat = exact_partial_sums(family, tree, &cursor, tail_depth)?[tail_depth];
    Ok(CylinderMeasure {
        word: word.format(family.sub.alphabet),
        phi_bar,
        x_hat,
        tail_depth,
        value: phi_bar * x_hat,
    })
}

/// Address of a weight-proportional descent of `target_depth` letters.
pub fn sample_point_from_measure(
    family: &WeightFamily,
    tree: &RealizationTree,
    target_depth: usize,
    key: &keys::Key,
) -> Result<Word> {
    if !target_depth.is_multiple_of(family.q()) {
        return Err(Error::Argument(format!(
            "target depth {target_depth} is not a multiple of q = {}",
            family.q()
        )));
    }
    Ok(family.descend_by_weight(tree, &tree.root(), target_depth / family.q(), key)?.word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::solve_sn;
    use crate::distributions::{RatioLaw, RatioVectorLaw};
    use crate::presets;
    use crate::rifs::SpongeSpec;
    use crate::stats::chi_square;

    fn deterministic(r: f64) -> SpongeSpec {
        SpongeSpec {
            name: None,
            d: 2,
            n: 4,
            translations: vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]],
            axis_laws: vec![RatioVectorLaw::independent(vec![RatioLaw::constant(r); 4]); 2],
            alpha_lo: None,
            alpha_hi: None,
            smooth_index: vec![1, 1],
            separated_index: vec![3, 3],
            smooth_block: Some(vec![1, 1]),
            escape_block: None,
        }
    }

    fn family_for(spec: &SpongeSpec, n: usize) -> WeightFamily {
        let sub = spec.subsystem(n).unwrap();
        let rep = solve_sn(spec, &sub, 1e-12).unwrap();
        weights_from_dimension(&sub, &rep).unwrap()
    }

    #[test]
    fn deterministic_weights_sum_to_one() {
        let spec = deterministic(0.4);
        let fam = family_for(&spec, 1);
        let tree = RealizationTree::realize(&spec, 3);
        let kids = fam.super_children(&tree, &tree.root()).unwrap();
        assert_eq!(kids.len(), 4);
        let total: f64 = kids.iter().map(|k| k.1).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!(kids.iter().all(|k| (k.1 - 0.25).abs() < 1e-10));
    }

    #[test]
    fn constant_weights_give_unit_martingale() {
        let spec = deterministic(0.4);
        let fam = family_for(&spec, 1);
        let rep = simulate_martingale(&fam, &spec, 1, &MartingaleConfig::new(3, 20)).unwrap();
        for l in &rep.levels {
            assert!((l.mean - 1.0).abs() < 1e-9 && l.var < 1e-18);
        }
    }

    #[test]
    fn weight_is_ratio_of_cumulative_phi() {
        let spec = presets::four_corner();
        let fam = family_for(&spec, 1);
        let tree = RealizationTree::realize(&spec, 9);
        let kids = fam.super_children(&tree, &tree.root()).unwrap();
        let (c, p) = &kids[2];
        let g = fam.super_children(&tree, c).unwrap();
        let (gc, gp) = &g[1];
        // Independent oracle: cumulative ratios of the full word.
        let phi = |cum: &[f64]| fam.weights.phi(cum);
        let direct = phi(&gc.cum) / phi(&c.cum);
        assert!((gp / direct - 1.0).abs() < 1e-10);
        assert!((p / phi(&c.cum) - 1.0).abs() < 1e-10);
        assert_eq!(gc.word.len(), 2 * fam.q());
        fam.check_gamma_word(&gc.word).unwrap();
    }

    #[test]
    fn key_walk_matches_cursor_walk() {
        for spec in presets::all() {
            let fam = family_for(&spec, 2);
            let tree = RealizationTree::realize(&spec, 21);
            let a = fam.super_children(&tree, &tree.root()).unwrap();
            let b = fam.super_weights(&tree, tree.root().key(), true).unwrap();
            assert_eq!(a.len(), b.len());
            for ((c, p), (k, w)) in a.iter().zip(&b) {
                assert_eq!(c.key(), k);
                assert!((p / w - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn descent_mode_is_unbiased() {
        let spec = presets::example_line();
        let fam = family_for(&spec, 1);
        let mut cfg = MartingaleConfig::new(3, 4000);
        cfg.enumeration_cap = 0;
        let rep = simulate_martingale(&fam, &spec, 5, &cfg).unwrap();
        assert_eq!(rep.mode, "descent");
        for l in &rep.levels {
            assert!((l.mean - 1.0).abs() < 3.0 * l.stderr + 1e-12, "{l:?}");
        }
    }

    #[test]
    fn budget_error() {
        let spec = presets::example_line();
        let fam = family_for(&spec, 1);
        let mut cfg = MartingaleConfig::new(3, 1000);
        cfg.compute_cap = 10;
        let e = simulate_martingale(&fam, &spec, 5, &cfg).unwrap_err();
        assert_eq!(e.kind(), crate::ErrorKind::Budget);
    }

    #[test]
    fn cylinder_measure_truncation_and_additivity() {
        let spec = presets::four_corner();
        let fam = family_for(&spec, 1);
        let tree = RealizationTree::realize(&spec, 4);
        let w = fam.super_children(&tree, &tree.root()).unwrap()[1].0.word.clone();
        let m0 = sample_cylinder_measure(&fam, &tree, &w, 0, u128::MAX).unwrap();
        assert_eq!(m0.x_hat, 1.0);
        assert_eq!(m0.value, m0.phi_bar);
        let m2 = sample_cylinder_measure(&fam, &tree, &w, 2, u128::MAX).unwrap();
        let kids = fam.super_children(&tree, &tree.descend(&w).unwrap()).unwrap();
        let sum: f64 = kids
            .iter()
            .map(|(c, _)| sample_cylinder_measure(&fam, &tree, &c.word, 1, u128::MAX).unwrap().value)
            .sum();
        assert!((sum / m2.value - 1.0).abs() < 1e-10);
        assert!(sample_cylinder_measure(&fam, &tree, &Word::from_letters(&[1, 2]), 0, u128::MAX).is_err());
    }

    #[test]
    fn descent_is_deterministic_and_matches_weights() {
        let spec = presets::example_line();
        let fam = family_for(&spec, 1);
        let tree = RealizationTree::realize(&spec, 2);
        let key = keys::root_key(77);
        let a = sample_point_from_measure(&fam, &tree, 2 * fam.q(), &key).unwrap();
        let b = sample_point_from_measure(&fam, &tree, 2 * fam.q(), &key).unwrap();
        assert_eq!(a, b);
        assert!(sample_point_from_measure(&fam, &tree, 5, &key).is_err());

        let kids = fam.super_children(&tree, &tree.root()).unwrap();
        let total: f64 = kids.iter().map(|k| k.1).sum();
        let draws = 20_000;
        let mut counts = vec![0.0; kids.len()];
        for i in 0..draws {
            let w = sample_point_from_measure(&fam, &tree, fam.q(), &keys::derive(&key, b"t", i)).unwrap();
            counts[w.letters()[0] as usize - 1] += 1.0;
        }
        let expected: Vec<f64> = kids.iter().map(|k| k.1 / total * draws as f64).collect();
        let (_, _, p) = chi_square(&counts, &expected).unwrap();
        assert!(p > 1e-3, "p = {p}");
    }
}
