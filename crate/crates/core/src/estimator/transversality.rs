//! Conditional probability that two projected `Γ_n` words come within `ρ`
//! when only the designated block after their split point is resampled.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::keys::{self, Key, StreamRng};
use crate::rifs::{RealizationTree, SpongeSpec};
use crate::stats::binomial_upper;
use crate::symbolic::{common_prefix_len, locate_block_offset, InfiniteWord, SubsystemSpec, Word};

#[derive(Clone, Debug, Serialize)]
pub struct TransversalityConfig {
    pub n: usize,
    /// Length of the sampled `Γ_n` words, in blocks.
    pub blocks: usize,
    pub pairs: usize,
    /// Radii, any order.
    pub rhos: Vec<f64>,
    pub calibration_envs: usize,
    pub test_envs: usize,
    pub resamples: usize,
    /// Projection truncation depth in letters.
    pub depth: usize,
}

impl TransversalityConfig {
    pub fn new(n: usize) -> Self {
        TransversalityConfig {
            n,
            blocks: 3,
            pairs: 5,
            rhos: (3..=7).map(|k| 0.5f64.powi(k)).collect(),
            calibration_envs: 40,
            test_envs: 20,
            resamples: 2000,
            depth: 48,
        }
    }
}

/// A pair of distinct `Γ_n` words with their split data.
#[derive(Clone, Debug, Serialize)]
pub struct ProbePair {
    pub i: Word,
    pub j: Word,
    /// `|𝚒 ∧ 𝚓|`.
    pub h: usize,
    /// Offset `u` of the designated block after the split.
    pub u: usize,
}

impl ProbePair {
    pub fn new(sub: &SubsystemSpec, i: Word, j: Word) -> Result<Self> {
        let u = locate_block_offset(sub, i.letters(), j.letters())
            .ok_or_else(|| Error::Argument(format!("{i} and {j} are not distinct subsystem words")))?;
        let h = common_prefix_len(i.letters(), j.letters());
        if i.len() < h + u + sub.p() + sub.p_prime() {
            return Err(Error::Argument(format!("{i} ends before its designated block")));
        }
        Ok(ProbePair { i, j, h, u })
    }

    /// Words `𝚒|_{h+u+j}`, `j = 1..p+p'`, whose ratios are resampled.
    pub fn designated(&self, sub: &SubsystemSpec) -> Vec<Word> {
        let start = self.h + self.u;
        (1..=sub.p() + sub.p_prime()).map(|j| self.i.prefix_word(start + j)).collect()
    }
}

/// Random pairs of distinct words made of `blocks` subsystem blocks.
pub fn choose_pairs(sub: &SubsystemSpec, blocks: usize, count: usize, key: &Key) -> Result<Vec<ProbePair>> {
    let suffix = sub.suffix();
    let word = |c: u64| {
        let mut rng = StreamRng::new(keys::derive(key, b"pair-word", c));
        let mut w = Word::empty();
        for _ in 0..blocks {
            for _ in 0..sub.n {
                w.push((1 + (rng.uniform() * sub.alphabet as f64) as usize).min(sub.alphabet) as u8);
            }
            w.extend_from(suffix.letters());
        }
        w
    };
    let mut out = Vec::with_capacity(count);
    let mut c = 0;
    while out.len() < count {
        let (a, b) = (word(c), word(c + 1));
        c += 2;
        if a != b {
            out.push(ProbePair::new(sub, a, b)?);
        }
    }
    Ok(out)
}

fn tail_of(sub: &SubsystemSpec, w: &Word) -> Result<InfiniteWord> {
    InfiniteWord::periodic(w.shift(w.len() - sub.q()))
}

/// Distances `|Π(𝚒) − Π(𝚓)|` in the environment `tree`, one per resample of
/// the designated block, plus `|ᾱ_{𝚒∧𝚓}^{(k)}|`.
pub fn resampled_distances(
    tree: &RealizationTree,
    sub: &SubsystemSpec,
    pair: &ProbePair,
    resamples: usize,
    depth: usize,
    key: &Key,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = tree.spec();
    let d = spec.d;
    let block = sub.p() + sub.p_prime();
    let start = pair.h + pair.u;
    if depth <= start + block {
        return Err(Error::Argument(format!("depth {depth} does not reach past the designated block")));
    }
    let (pj, _) = tree.project(&pair.j, &tail_of(sub, &pair.j)?, depth)?;
    let base = tree.descend(&pair.i.prefix_word(start))?;
    let meet: Vec<f64> = tree.descend(&pair.i.prefix_word(pair.h))?.cum.iter().map(|a| a.abs()).collect();
    let rest = pair.i.shift(start + block);
    let tail = tail_of(sub, &pair.i)?;
    let letters = &pair.i.letters()[start..start + block];
    let mut out = Vec::with_capacity(resamples);
    let mut ratios = vec![0.0; d];
    for r in 0..resamples as u64 {
        let mut rng = StreamRng::new(keys::derive(key, b"resample", r));
        let mut c = base.clone();
        for &l in letters {
            for (k, v) in ratios.iter_mut().enumerate() {
                *v = spec.axis_laws[k].marginals[l as usize - 1].sample(&mut rng);
            }
            c = tree.step_with_ratios(&c, l, &ratios);
        }
        let (local, _) = tree.project_from(&c, &rest, &tail, depth - start - block)?;
        let pi = c.apply(&local);
        out.push(pi.iter().zip(&pj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
    }
    Ok((out, meet))
}

/// `∏_k min{1, Cρ/|ᾱ^{(k)}|}`.
pub fn product_bound(c: f64, rho: f64, meet: &[f64]) -> f64 {
    meet.iter().map(|a| (c * rho / a).min(1.0)).product()
}

/// Smallest `C` with `product_bound(C, ρ, meet) ≥ target`.
pub fn required_constant(target: f64, rho: f64, meet: &[f64]) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let mut hi = meet.iter().copied().fold(0.0, f64::max) / rho;
    let mut lo = 0.0;
    if product_bound(hi, rho, meet) < target {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if product_bound(mid, rho, meet) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbePoint {
    pub calibration: bool,
    pub pair: usize,
    pub env: usize,
    pub rho: f64,
    pub hits: u64,
    pub resamples: u64,
    pub probability: f64,
    /// Normal-approximation upper 3σ bound on the probability.
    pub upper: f64,
    pub meet: Vec<f64>,
    /// `∏_k min{1, Cρ/|ᾱ_{𝚒∧𝚓}^{(k)}|}` with the fitted `C`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalityReport {
    pub n: usize,
    pub q: usize,
    pub pairs: Vec<ProbePair>,
    pub rhos: Vec<f64>,
    /// Constant fitted on the calibration environments.
    pub fitted_c: f64,
    /// Counts non-decreasing in `ρ` for every pair and environment.
    pub monotone: bool,
    /// Test points with probability above the fitted bound.
    pub violations: usize,
    pub points: Vec<ProbePoint>,
}

impl TransversalityReport {
    /// Maximum over environments of the test-set probability, per pair and `ρ`.
    pub fn max_probabilities(&self) -> Vec<(usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for p in 0..self.pairs.len() {
            for &rho in &self.rhos {
                let pts = self.points.iter().filter(|x| !x.calibration && x.pair == p && x.rho == rho);
                let (mut prob, mut bound) = (0.0f64, 0.0f64);
                for x in pts {
                    prob = prob.max(x.probability);
                    bound = bound.max(x.bound);
                }
                out.push((p, rho, prob, bound));
            }
        }
        out
    }
}

fn env_points(
    spec: &std::sync::Arc<SpongeSpec>,
    sub: &SubsystemSpec,
    pairs: &[ProbePair],
    cfg: &TransversalityConfig,
    rhos: &[f64],
    seed: u64,
    calibration: bool,
) -> Result<Vec<ProbePoint>> {
    let (tag, envs): (&[u8], usize) = if calibration {
        (b"calibration-env", cfg.calibration_envs)
    } else {
        (b"test-env", cfg.test_envs)
    };
    let jobs: Vec<(usize, usize)> = (0..pairs.len()).flat_map(|p| (0..envs).map(move |e| (p, e))).collect();
    let chunks: Vec<Vec<ProbePoint>> = jobs
        .into_par_iter()
        .map(|(p, e)| {
            let tree = RealizationTree::new(spec.clone(), keys::derive_seed(seed, tag, e as u64));
            let key = keys::derive(&keys::root_key(seed), tag, (p * envs + e) as u64);
            let (dist, meet) = resampled_distances(&tree, sub, &pairs[p], cfg.resamples, cfg.depth, &key)?;
            Ok(rhos
                .iter()
                .map(|&rho| {
                    let hits = dist.iter().filter(|&&x| x < rho).count() as u64;
                    let n = cfg.resamples as u64;
                    ProbePoint {
                        calibration,
                        pair: p,
                        env: e,
                        rho,
                        hits,
                        resamples: n,
                        probability: hits as f64 / n as f64,
                        upper: binomial_upper(hits, n, 3.0),
                        meet: meet.clone(),
                        bound: 0.0,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Calibrates `C` on one set of environments and tests the product bound
/// out of sample on fresh environments and resamples.
pub fn transversality_suite(spec: &SpongeSpec, cfg: &TransversalityConfig, seed: u64) -> Result<TransversalityReport> {
    if cfg.rhos.is_empty() || cfg.rhos.iter().any(|r| !(*r > 0.0)) || cfg.resamples == 0 {
        return Err(Error::Argument("need positive radii and at least one resample".into()));
    }
    let sub = spec.subsystem(cfg.n)?;
    let mut rhos = cfg.rhos.clone();
    rhos.sort_by(f64::total_cmp);
    let pairs = choose_pairs(&sub, cfg.blocks, cfg.pairs, &keys::derive(&keys::root_key(seed), b"pairs", 0))?;
    let arc = std::sync::Arc::new(spec.clone());
    let mut points = env_points(&arc, &sub, &pairs, cfg, &rhos, seed, true)?;
    points.extend(env_points(&arc, &sub, &pairs, cfg, &rhos, seed, false)?);

    let fitted_c = points
        .iter()
        .filter(|p| p.calibration)
        .map(|p| required_constant(p.upper, p.rho, &p.meet))
        .fold(0.0, f64::max);
    let mut violations = 0;
    for p in points.iter_mut() {
        p.bound = product_bound(fitted_c, p.rho, &p.meet);
        if !p.calibration && p.probability > p.bound {
            violations += 1;
        }
    }
    let monotone = points.chunks(rhos.len()).all(|c| c.windows(2).all(|w| w[0].hits <= w[1].hits));
    Ok(TransversalityReport {
        n: cfg.n,
        q: sub.q(),
        pairs,
        rhos,
        fitted_c,
        monotone,
        violations,
        points,
    })
}

/// Maximum over `environments` of the conditional probability for one pair
/// and radius, together with `∏_k min{1, Cρ/|ᾱ_{𝚒∧𝚓}^{(k)}|}` for the given
/// `C` (the largest value over environments).
#[allow(clippy::too_many_arguments)]
pub fn transversality_probe(
    spec: &SpongeSpec,
    sub: &SubsystemSpec,
    pair: &ProbePair,
    rho: f64,
    environments: usize,
    resamples: usize,
    depth: usize,
    c: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let arc = std::sync::Arc::new(spec.clone());
    let mut best = (0.0f64, 0.0f64);
    for e in 0..environments {
        let tree = RealizationTree::new(arc.clone(), keys::derive_seed(seed, b"probe-env", e as u64));
        let key = keys::derive(&keys::root_key(seed), b"probe-env", e as u64);
        let (dist, meet) = resampled_distances(&tree, sub, pair, resamples, depth, &key)?;
        let p = dist.iter().filter(|&&x| x < rho).count() as f64 / resamples as f64;
        best.0 = best.0.max(p);
        best.1 = best.1.max(product_bound(c, rho, &meet));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn small_cfg() -> TransversalityConfig {
        TransversalityConfig {
            n: 2,
            blocks: 3,
            pairs: 2,
            rhos: vec![1e-3, 2e-3, 4e-3, 8e-3, 100.0],
            calibration_envs: 4,
            test_envs: 2,
            resamples: 200,
            depth: 40,
        }
    }

    #[test]
    fn pairs_have_designated_blocks() {
        let spec = presets::example_line();
        let sub = spec.subsystem(2).unwrap();
        let pairs = choose_pairs(&sub, 3, 5, &keys::root_key(1)).unwrap();
        let suffix = sub.suffix();
        for p in &pairs {
            assert_ne!(p.i, p.j);
            assert!(p.u >= 1 && p.u <= sub.n);
            let letters: Vec<u8> = p.designated(&sub).iter().map(|w| w.last().unwrap()).collect();
            assert_eq!(letters, suffix.letters());
        }
    }

    #[test]
    fn huge_radius_is_certain_and_monotone() {
        let spec = presets::example_line();
        let rep = transversality_suite(&spec, &small_cfg(), 3).unwrap();
        assert!(rep.monotone);
        for p in rep.points.iter().filter(|p| p.rho == 100.0) {
            assert_eq!(p.probability, 1.0);
            assert!(p.bound >= 1.0);
        }
    }

    #[test]
    fn constant_fit_inverts_bound() {
        let meet = [0.3, 0.05];
        let c = required_constant(0.2, 0.01, &meet);
        assert!((product_bound(c, 0.01, &meet) - 0.2).abs() < 1e-9);
        assert_eq!(required_constant(0.0, 0.01, &meet), 0.0);
        // d = 1 closed form
        let c1 = required_constant(0.2, 0.01, &[0.3]);
        assert!((c1 - 0.2 * 0.3 / 0.01).abs() < 1e-9);
    }

    #[test]
    fn resampling_only_moves_the_first_word() {
        let spec = presets::four_corner();
        let sub = spec.subsystem(1).unwrap();
        let pair = &choose_pairs(&sub, 2, 1, &keys::root_key(5)).unwrap()[0];
        let tree = RealizationTree::realize(&spec, 2);
        let (a, _) = resampled_distances(&tree, &sub, pair, 50, 40, &keys::root_key(9)).unwrap();
        let (b, _) = resampled_distances(&tree, &sub, pair, 50, 40, &keys::root_key(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().any(|x| (x - a[0]).abs() > 0.0));
    }
}
