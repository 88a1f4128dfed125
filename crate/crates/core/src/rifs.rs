//! System specification, realization trees and canonical projections.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::RatioVectorLaw;
use crate::error::{Error, Result};
use crate::keys::{self, Key};
use crate::symbolic::{Block, InfiniteWord, SubsystemSpec, Word};

/// Default smoothing-block length when a spec does not declare one.
pub const DEFAULT_SMOOTH_BLOCK: usize = 2;

/// Full description of a random sponge. Indices (`smooth_index`,
/// `separated_index`) are 1-based child letters, one per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpongeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub d: usize,
    pub n: usize,
    /// `translations[i][k] = t_{i+1} · e_{k+1}`.
    pub translations: Vec<Vec<f64>>,
    pub axis_laws: Vec<RatioVectorLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_hi: Option<f64>,
    pub smooth_index: Vec<u8>,
    pub separated_index: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_block: Option<Vec<usize>>,
    /// Upward overrides of the computed escape-block lengths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape_block: Option<Vec<usize>>,
}

/// Axis-aligned box, one interval per axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, x: &[f64], slack: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, v)| *v >= self.lo[k] - slack[k] && *v <= self.hi[k] + slack[k])
    }

    pub fn contains_box(&self, other: &BoundingBox, tol: f64) -> bool {
        (0..self.dim()).all(|k| other.lo[k] >= self.lo[k] - tol && other.hi[k] <= self.hi[k] + tol)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    /// Overlap with positive volume.
    pub fn overlaps(&self, other: &BoundingBox) -> bool {
        (0..self.dim()).all(|k| self.lo[k] < other.hi[k] && other.lo[k] < self.hi[k])
    }
}

impl SpongeSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: SpongeSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// SHA-256 of the compact canonical JSON form, hex encoded.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, n) = (self.d, self.n);
        if !(1..=8).contains(&d) {
            return Err(Error::invariant("ambient-dimension", format!("d = {d} must lie in 1..=8")));
        }
        if !(2..=255).contains(&n) {
            return Err(Error::invariant("alphabet-size", format!("N = {n} must lie in 2..=255")));
        }
        if self.translations.len() != n || self.translations.iter().any(|t| t.len() != d) {
            return Err(Error::invariant(
                "translation-shape",
                format!("expected {n} translations with {d} coordinates each"),
            ));
        }
        if self.translations.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invariant("translation-shape", "translations must be finite"));
        }
        for k in 0..d {
            let first = self.translations[0][k];
            if self.translations.iter().all(|t| t[k] == first) {
                return Err(Error::invariant(
                    "non-singleton-translations",
                    format!("all translations share coordinate {first} on axis {}", k + 1),
                ));
            }
        }
        if self.axis_laws.len() != d {
            return Err(Error::invariant(
                "axis-law-count",
                format!("expected {d} axis laws, got {}", self.axis_laws.len()),
            ));
        }
        for law in &self.axis_laws {
            law.validate(n)?;
        }
        let (lo, hi) = self.law_bounds();
        let (alo, ahi) = self.alpha_bounds();
        if !(alo > 0.0 && alo <= ahi && ahi < 1.0) {
            return Err(Error::invariant(
                "modulus-bounds",
                format!("need 0 < alpha_lo <= alpha_hi < 1, got [{alo}, {ahi}]"),
            ));
        }
        if lo < alo || hi > ahi {
            return Err(Error::invariant(
                "modulus-bounds",
                format!("law supports [{lo}, {hi}] exceed declared bounds [{alo}, {ahi}]"),
            ));
        }
        if self.smooth_index.len() != d || self.separated_index.len() != d {
            return Err(Error::invariant(
                "designated-indices",
                "smooth_index and separated_index need one entry per axis",
            ));
        }
        for k in 0..d {
            let (l, lp) = (self.smooth_index[k] as usize, self.separated_index[k] as usize);
            if !(1..=n).contains(&l) || !(1..=n).contains(&lp) {
                return Err(Error::invariant(
                    "designated-indices",
                    format!("indices on axis {} must lie in 1..={n}", k + 1),
                ));
            }
            if !self.axis_laws[k].marginals[l - 1].is_continuous() {
                return Err(Error::invariant(
                    "eventually-smooth-index",
                    format!("child {l} on axis {} has no density", k + 1),
                ));
            }
            if self.translations[l - 1][k] == self.translations[lp - 1][k] {
                return Err(Error::invariant(
                    "distinct-separated-translation",
                    format!("t_{l} and t_{lp} agree on axis {}", k + 1),
                ));
            }
        }
        if let Some(p) = &self.smooth_block {
            if p.len() != d || p.contains(&0) {
                return Err(Error::invariant(
                    "block-lengths",
                    "smooth_block needs one positive length per axis",
                ));
            }
        }
        if let Some(pp) = &self.escape_block {
            if pp.len() != d {
                return Err(Error::invariant("block-lengths", "escape_block needs one length per axis"));
            }
            let need = self.computed_escape_lengths();
            for k in 0..d {
                if pp[k] < need[k] {
                    return Err(Error::invariant(
                        "block-lengths",
                        format!("escape block on axis {} must be at least {}", k + 1, need[k]),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `(min, max)` of `|α|` over all marginal supports.
    pub fn law_bounds(&self) -> (f64, f64) {
        self.axis_laws
            .iter()
            .flat_map(|l| &l.marginals)
            .map(|m| m.abs_bounds())
            .fold((f64::INFINITY, 0.0), |(a, b), (lo, hi)| (a.min(lo), b.max(hi)))
    }

    /// `(α̲, ᾱ)`: declared values, or the law bounds.
    pub fn alpha_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.law_bounds();
        (self.alpha_lo.unwrap_or(lo), self.alpha_hi.unwrap_or(hi))
    }

    pub fn alpha_hi(&self) -> f64 {
        self.alpha_bounds().1
    }

    pub fn translation(&self, letter: u8, axis: usize) -> f64 {
        self.translations[letter as usize - 1][axis]
    }

    /// Whether every ratio is positive almost surely.
    pub fn positive_ratios(&self) -> bool {
        self.axis_laws.iter().flat_map(|l| &l.marginals).all(|m| m.is_positive())
    }

    /// The box containing every projection, for every realization.
    pub fn bounding_box(&self) -> BoundingBox {
        let a = self.alpha_hi();
        let mut lo = Vec::with_capacity(self.d);
        let mut hi = Vec::with_capacity(self.d);
        for k in 0..self.d {
            let (tmin, tmax) = self.translation_range(k);
            let pad = a * (tmax - tmin) / (1.0 - a);
            lo.push(tmin - pad);
            hi.push(tmax + pad);
        }
        BoundingBox { lo, hi }
    }

    /// Smallest box mapped into itself by every map: the hull of the
    /// translations when all ratios are positive, else the bounding box.
    pub fn invariant_box(&self) -> BoundingBox {
        if self.positive_ratios() {
            let (lo, hi) = (0..self.d).map(|k| self.translation_range(k)).unzip();
            BoundingBox { lo, hi }
        } else {
            self.bounding_box()
        }
    }

    fn translation_range(&self, axis: usize) -> (f64, f64) {
        self.translations
            .iter()
            .map(|t| t[axis])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
    }

    fn gap(&self, axis: usize) -> f64 {
        (self.translation(self.smooth_index[axis], axis)
            - self.translation(self.separated_index[axis], axis))
        .abs()
    }

    /// Smallest `u ≥ 1` per axis with `ᾱ^u·diam < |Δ| − ᾱ^u·diam`, where `Δ`
    /// is the gap between the smooth and separated translations.
    pub fn computed_escape_lengths(&self) -> Vec<usize> {
        let a = self.alpha_hi();
        let b = self.bounding_box();
        (0..self.d)
            .map(|k| {
                let (diam, gap) = (b.width(k), self.gap(k));
                let mut u = 1;
                while 2.0 * a.powi(u as i32) * diam >= gap {
                    u += 1;
                }
                u
            })
            .collect()
    }

    /// `p'_k`: computed lengths raised to any declared override.
    pub fn escape_lengths(&self) -> Vec<usize> {
        let computed = self.computed_escape_lengths();
        match &self.escape_block {
            Some(o) => computed.iter().zip(o).map(|(c, o)| *c.max(o)).collect(),
            None => computed,
        }
    }

    /// `p_k`.
    pub fn smooth_lengths(&self) -> Vec<usize> {
        self.smooth_block
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_SMOOTH_BLOCK; self.d])
    }

    /// Distance from `t_{ℓ_k}` that every projection starting with the
    /// escape block `𝚔_k` keeps, per axis.
    pub fn separation_constant(&self) -> Vec<f64> {
        let a = self.alpha_hi();
        let b = self.bounding_box();
        let pp = self.escape_lengths();
        (0..self.d)
            .map(|k| self.gap(k) - a.powi(pp[k] as i32) * b.width(k))
            .collect()
    }

    /// The subsystem `𝒥_n` for block length `n`.
    pub fn subsystem(&self, n: usize) -> Result<SubsystemSpec> {
        self.subsystem_with(n, &self.smooth_lengths(), &self.escape_lengths())
    }

    /// `𝒥_n` with explicit block lengths (zero-length blocks allowed).
    pub fn subsystem_with(&self, n: usize, p: &[usize], pp: &[usize]) -> Result<SubsystemSpec> {
        let smoothing = (0..self.d)
            .map(|k| Block { letter: self.smooth_index[k], len: p[k] })
            .collect();
        let escape = (0..self.d)
            .map(|k| Block { letter: self.separated_index[k], len: pp[k] })
            .collect();
        SubsystemSpec::new(self.n, n, smoothing, escape)
    }

    /// Truncation depth reaching resolution `eps`.
    pub fn depth_for_resolution(&self, eps: f64) -> usize {
        (eps.ln() / self.alpha_hi().ln()).ceil().max(0.0) as usize
    }
}

/// Ratios handed to the `N` children of one node: `get(j, k)` is the
/// signed ratio of child `j` (0-based) on axis `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChildRatios {
    d: usize,
    data: Vec<f64>,
}

impl ChildRatios {
    pub fn get(&self, child: usize, axis: usize) -> f64 {
        self.data[child * self.d + axis]
    }

    pub fn child(&self, child: usize) -> &[f64] {
        &self.data[child * self.d..(child + 1) * self.d]
    }

    fn set_child(&mut self, child: usize, values: &[f64]) {
        self.data[child * self.d..(child + 1) * self.d].copy_from_slice(values);
    }
}

/// Position in a realization tree: the word, its key, and the composed
/// affine map `x ↦ cum·x + offset` of `f_{w|1} ∘ ⋯ ∘ f_w` per axis.
#[derive(Clone, Debug)]
pub struct Cursor {
    pub word: Word,
    key: Key,
    pub cum: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Cursor {
    pub fn key(&self) -> &Key {
        &self.key
    }

    /// Image of `x` under the composed map.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| self.cum[k] * v + self.offset[k])
            .collect()
    }

    /// `Π(w · j j j ⋯)`: the image of the fixed point `t_j`.
    pub fn fixed_point_image(&self, spec: &SpongeSpec, letter: u8) -> Vec<f64> {
        (0..spec.d)
            .map(|k| self.cum[k] * spec.translation(letter, k) + self.offset[k])
            .collect()
    }

    pub fn rect(&self, b: &BoundingBox) -> BoundingBox {
        let mut lo = Vec::with_capacity(b.dim());
        let mut hi = Vec::with_capacity(b.dim());
        for k in 0..b.dim() {
            let u = self.cum[k] * b.lo[k] + self.offset[k];
            let v = self.cum[k] * b.hi[k] + self.offset[k];
            lo.push(u.min(v));
            hi.push(u.max(v));
        }
        BoundingBox { lo, hi }
    }
}

/// Seed-deterministic assignment of diagonal matrices to words.
///
/// The ratio vector of the children of `w` on axis `k` is drawn from
/// `axis_laws[k]` with the stream key of `(seed, w, k)`. Values are pure
/// functions of their address, so any expansion order gives the same tree.
#[derive(Debug)]
pub struct RealizationTree {
    spec: Arc<SpongeSpec>,
    seed: u64,
    root: Key,
    axis_streams: Vec<usize>,
    overrides: HashMap<Word, Vec<f64>>,
    cache_depth: usize,
    cache: RwLock<HashMap<Word, Arc<ChildRatios>>>,
}

impl RealizationTree {
    pub fn new(spec: Arc<SpongeSpec>, seed: u64) -> Self {
        let mut cache_depth = 0;
        while (spec.n as f64).powi(cache_depth as i32 + 1) <= 4096.0 {
            cache_depth += 1;
        }
        let axis_streams = (0..spec.d).collect();
        RealizationTree {
            spec,
            seed,
            root: keys::root_key(seed),
            axis_streams,
            overrides: HashMap::new(),
            cache_depth,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn realize(spec: &SpongeSpec, seed: u64) -> Self {
        Self::new(Arc::new(spec.clone()), seed)
    }

    /// Same tree with axis `k` driven by stream `streams[k]`.
    pub fn with_axis_streams(mut self, streams: Vec<usize>) -> Result<Self> {
        let mut sorted = streams.clone();
        sorted.sort_unstable();
        if sorted != (0..self.spec.d).collect::<Vec<_>>() {
            return Err(Error::Argument("axis streams must permute 0..d".into()));
        }
        self.axis_streams = streams;
        self.cache = RwLock::new(HashMap::new());
        Ok(self)
    }

    /// A copy whose ratios at the given words (all axes) are replaced.
    pub fn with_overrides(&self, overrides: HashMap<Word, Vec<f64>>) -> Self {
        RealizationTree {
            spec: self.spec.clone(),
            seed: self.seed,
            root: self.root,
            axis_streams: self.axis_streams.clone(),
            overrides,
            cache_depth: self.cache_depth,
            cache: RwLock::new(self.cache.read().unwrap().clone()),
        }
    }

    pub fn spec(&self) -> &SpongeSpec {
        &self.spec
    }

    pub fn spec_arc(&self) -> Arc<SpongeSpec> {
        self.spec.clone()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn root(&self) -> Cursor {
        Cursor {
            word: Word::empty(),
            key: self.root,
            cum: vec![1.0; self.spec.d],
            offset: vec![0.0; self.spec.d],
        }
    }

    pub fn has_overrides(&self) -> bool {
        !self.overrides.is_empty()
    }

    /// Ratios on `axis` of the children of the node with key `key`,
    /// ignoring overrides.
    pub fn axis_vector(&self, key: &Key, axis: usize) -> Result<Vec<f64>> {
        self.spec.axis_laws[axis].sample_vector(&keys::axis_key(key, self.axis_streams[axis]))
    }

    fn raw_children(&self, key: &Key) -> Result<ChildRatios> {
        let (d, n) = (self.spec.d, self.spec.n);
        let mut data = vec![0.0; n * d];
        for k in 0..d {
            let v = self.axis_vector(key, k)?;
            for j in 0..n {
                data[j * d + k] = v[j];
            }
        }
        Ok(ChildRatios { d, data })
    }

    /// Ratios of the children of the node at `cursor`.
    pub fn children(&self, cursor: &Cursor) -> Result<Arc<ChildRatios>> {
        let cached = cursor.word.len() < self.cache_depth;
        let mut table = if cached {
            let hit = self.cache.read().unwrap().get(&cursor.word).cloned();
            if let Some(t) = hit {
                t
            } else {
                let t = Arc::new(self.raw_children(&cursor.key)?);
                self.cache.write().unwrap().insert(cursor.word.clone(), t.clone());
                t
            }
        } else {
            Arc::new(self.raw_children(&cursor.key)?)
        };
        if !self.overrides.is_empty() {
            for j in 1..=self.spec.n as u8 {
                if let Some(v) = self.overrides.get(&cursor.word.child(j)) {
                    Arc::make_mut(&mut table).set_child(j as usize - 1, v);
                }
            }
        }
        Ok(table)
    }

    /// Moves from `cursor` to child `letter`, given the parent's table.
    pub fn step(&self, cursor: &Cursor, table: &ChildRatios, letter: u8) -> Cursor {
        let d = self.spec.d;
        let mut cum = Vec::with_capacity(d);
        let mut offset = Vec::with_capacity(d);
        for k in 0..d {
            let a = table.get(letter as usize - 1, k);
            let t = self.spec.translation(letter, k);
            offset.push(cursor.offset[k] + cursor.cum[k] * (1.0 - a) * t);
            cum.push(cursor.cum[k] * a);
        }
        Cursor {
            word: cursor.word.child(letter),
            key: keys::child_key(&cursor.key, letter),
            cum,
            offset,
        }
    }

    /// Moves from `cursor` to child `letter` using the given ratios (one per
    /// axis) instead of the sampled ones.
    pub fn step_with_ratios(&self, cursor: &Cursor, letter: u8, ratios: &[f64]) -> Cursor {
        let table = ChildRatios {
            d: self.spec.d,
            data: {
                let mut v = vec![0.0; self.spec.n * self.spec.d];
                let j = letter as usize - 1;
                v[j * self.spec.d..(j + 1) * self.spec.d].copy_from_slice(ratios);
                v
            },
        };
        self.step(cursor, &table, letter)
    }

    /// Cursor at the end of `letters`, starting from `start`.
    pub fn descend_from(&self, start: &Cursor, letters: &[u8]) -> Result<Cursor> {
        let mut c = start.clone();
        for &l in letters {
            let table = self.children(&c)?;
            c = self.step(&c, &table, l);
        }
        Ok(c)
    }

    pub fn descend(&self, word: &Word) -> Result<Cursor> {
        self.descend_from(&self.root(), word.letters())
    }

    /// Diagonal of `A_word`; all ones for the empty word.
    pub fn ratios(&self, word: &Word) -> Result<Vec<f64>> {
        match word.last() {
            None => Ok(vec![1.0; self.spec.d]),
            Some(l) => {
                let parent = self.descend(&word.prefix_word(word.len() - 1))?;
                Ok(self.children(&parent)?.child(l as usize - 1).to_vec())
            }
        }
    }

    /// `ᾱ_word^{(k)}`: product of the ratios along the prefixes.
    pub fn cumulative_ratio(&self, word: &Word, axis: usize) -> Result<f64> {
        Ok(self.descend(word)?.cum[axis])
    }

    /// `Π(word · tail)` truncated at `depth` letters, with the per-axis
    /// error radius `ᾱ^depth · diam(box_k)`.
    pub fn project(&self, word: &Word, tail: &InfiniteWord, depth: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.project_from(&self.root(), word, tail, depth)
    }

    /// `π_base(word · tail)`: the projection seen from the node `base`,
    /// i.e. using the ratios at `base · word · tail|_m`.
    pub fn project_from(
        &self,
        base: &Cursor,
        word: &Word,
        tail: &InfiniteWord,
        depth: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let letter = |i: usize| {
            if i < word.len() {
                word.letters()[i]
            } else {
                tail.letter(i - word.len())
            }
        };
        let local = Cursor {
            word: base.word.clone(),
            key: base.key,
            cum: vec![1.0; self.spec.d],
            offset: vec![0.0; self.spec.d],
        };
        let mut c = local;
        for i in 0..depth {
            let table = self.children(&c)?;
            c = self.step(&c, &table, letter(i));
        }
        let point = c.fixed_point_image(&self.spec, letter(depth));
        Ok((point, self.error_radius(depth)))
    }

    pub fn error_radius(&self, depth: usize) -> Vec<f64> {
        let a = self.spec.alpha_hi().powi(depth as i32);
        let b = self.spec.bounding_box();
        (0..self.spec.d).map(|k| a * b.width(k)).collect()
    }

    /// Image of `b` under `f_{w|1} ∘ ⋯ ∘ f_w`.
    pub fn cylinder_rect(&self, word: &Word, b: &BoundingBox) -> Result<BoundingBox> {
        Ok(self.descend(word)?.rect(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RatioLaw;
    use crate::presets;

    fn example_line() -> SpongeSpec {
        presets::example_line()
    }

    fn deterministic(ratio: f64) -> SpongeSpec {
        SpongeSpec {
            name: None,
            d: 2,
            n: 4,
            translations: vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]],
            axis_laws: vec![RatioVectorLaw::independent(vec![RatioLaw::constant(ratio); 4]); 2],
            alpha_lo: None,
            alpha_hi: None,
            smooth_index: vec![1, 1],
            separated_index: vec![3, 3],
            smooth_block: None,
            escape_block: None,
        }
    }

    #[test]
    fn constant_laws_ignore_seed() {
        let spec = deterministic(0.5);
        let w = Word::from_letters(&[1, 3, 2, 4]);
        let a = RealizationTree::realize(&spec, 1).project(&w, &InfiniteWord::constant(2), 20).unwrap();
        let b = RealizationTree::realize(&spec, 99).project(&w, &InfiniteWord::constant(2), 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn expansion_order_does_not_matter() {
        let spec = presets::four_corner();
        let t1 = RealizationTree::realize(&spec, 5);
        let t2 = RealizationTree::realize(&spec, 5);
        let words: Vec<Word> = (0..1000u64)
            .map(|i| {
                let k = keys::derive_seed(3, b"w", i);
                let len = 1 + (k % 9) as usize;
                Word::from_letters(
                    &(0..len).map(|j| 1 + ((k >> (4 + 2 * j)) % 4) as u8).collect::<Vec<_>>(),
                )
            })
            .collect();
        let forward: Vec<_> = words.iter().map(|w| t1.ratios(w).unwrap()).collect();
        let backward: Vec<_> = words.iter().rev().map(|w| t2.ratios(w).unwrap()).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
    }

    #[test]
    fn example_line_fixed_children() {
        let t = RealizationTree::realize(&example_line(), 3);
        for w in ["2", "13", "3312", "1"] {
            let w = Word::parse(w, 3).unwrap();
            let r = t.ratios(&w.child(2)).unwrap();
            assert_eq!(r, vec![1.0 / 3.0]);
            assert_eq!(t.ratios(&w.child(3)).unwrap(), vec![0.25]);
            let r1 = t.ratios(&w.child(1)).unwrap()[0];
            assert!((1.0 / 3.0..=0.5).contains(&r1));
        }
    }

    #[test]
    fn cumulative_ratio_examples() {
        let t = RealizationTree::realize(&example_line(), 3);
        assert_eq!(t.cumulative_ratio(&Word::empty(), 0).unwrap(), 1.0);
        let c = t.cumulative_ratio(&Word::from_letters(&[2, 2]), 0).unwrap();
        assert!((c - 1.0 / 9.0).abs() < 1e-16);
        let spec = presets::four_corner();
        let t = RealizationTree::realize(&spec, 8);
        let (lo, hi) = spec.alpha_bounds();
        for i in 0..100u64 {
            let k = keys::derive_seed(1, b"cr", i);
            let len = (k % 12) as usize;
            let w = Word::from_letters(&(0..len).map(|j| 1 + ((k >> (8 + 2 * j)) % 4) as u8).collect::<Vec<_>>());
            for axis in 0..2 {
                let c = t.cumulative_ratio(&w, axis).unwrap().abs();
                assert!(c >= lo.powi(len as i32) * (1.0 - 1e-12) && c <= hi.powi(len as i32) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn projection_of_constant_tail_is_fixed_point() {
        let spec = deterministic(0.3);
        let t = RealizationTree::realize(&spec, 0);
        for l in 1..=4u8 {
            let (p, _) = t.project(&Word::empty(), &InfiniteWord::constant(l), 30).unwrap();
            for k in 0..2 {
                assert!((p[k] - spec.translations[l as usize - 1][k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn example_line_word_two_then_threes() {
        let spec = example_line();
        let t = RealizationTree::realize(&spec, 4);
        let (p, _) = t.project(&Word::from_letters(&[2]), &InfiniteWord::constant(3), 25).unwrap();
        // Direct iteration of f_2 ∘ f_3 ∘ ⋯ ∘ f_3 at 0.
        let mut x = 0.0;
        for _ in 0..24 {
            x /= 4.0;
        }
        x /= 3.0;
        assert_eq!(p[0], x);
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn projection_matches_direct_composition() {
        let spec = presets::four_corner();
        let t = RealizationTree::realize(&spec, 21);
        let w = Word::from_letters(&[1, 4, 2, 2, 3, 1, 4, 3]);
        let (p, _) = t.project(&w, &InfiniteWord::constant(1), 8).unwrap();
        // Oracle: apply f_{w|8}, then f_{w|7}, ..., f_{w|1} to t_1.
        let mut x = spec.translations[0].clone();
        for m in (1..=8).rev() {
            let r = t.ratios(&w.prefix_word(m)).unwrap();
            let letter = w.letters()[m - 1];
            for k in 0..2 {
                let tk = spec.translation(letter, k);
                x[k] = r[k] * x[k] + (1.0 - r[k]) * tk;
            }
        }
        for k in 0..2 {
            assert!((p[k] - x[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn error_radius_shrinks_by_alpha() {
        for i in 0..10 {
            let hi = 0.2 + 0.05 * i as f64;
            let mut spec = deterministic(hi);
            spec.axis_laws = vec![RatioVectorLaw::independent(vec![RatioLaw::uniform(hi / 2.0, hi); 4]); 2];
            let t = RealizationTree::realize(&spec, i);
            let r1 = t.error_radius(5);
            let r2 = t.error_radius(6);
            for k in 0..2 {
                assert!((r2[k] / r1[k] - hi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounding_box_examples() {
        let spec = deterministic(0.5);
        let b = spec.bounding_box();
        assert_eq!(b.lo, vec![-1.0, -1.0]);
        assert_eq!(b.hi, vec![2.0, 2.0]);
        let b = deterministic(1e-9).bounding_box();
        assert!((b.lo[0]).abs() < 1e-8 && (b.hi[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn escape_lengths_of_presets() {
        assert_eq!(presets::four_corner().escape_lengths(), vec![3, 3]);
        assert_eq!(example_line().escape_lengths(), vec![3]);
        assert_eq!(example_line().subsystem(1).unwrap().q(), 6);
        assert_eq!(presets::four_corner().subsystem(1).unwrap().q(), 11);
        for spec in presets::all() {
            assert!(spec.separation_constant().iter().all(|c| *c > 0.0));
        }
    }

    #[test]
    fn cylinder_rects_nest() {
        let spec = presets::four_corner();
        let t = RealizationTree::realize(&spec, 2);
        let b = spec.invariant_box();
        assert_eq!(t.cylinder_rect(&Word::empty(), &b).unwrap(), b);
        let mut frontier = vec![t.root()];
        for _ in 0..4 {
            let mut next = Vec::new();
            for c in &frontier {
                let parent = c.rect(&b);
                let table = t.children(c).unwrap();
                for j in 1..=4 {
                    let child = t.step(c, &table, j);
                    let r = child.rect(&b);
                    assert!(parent.contains_box(&r, 1e-12));
                    for k in 0..2 {
                        assert!((r.width(k) - child.cum[k].abs() * b.width(k)).abs() < 1e-12);
                    }
                    next.push(child);
                }
            }
            frontier = next;
        }
        assert_eq!(frontier.len(), 256);
    }

    #[test]
    fn factorization_through_common_prefix() {
        let spec = presets::four_corner();
        let t = RealizationTree::realize(&spec, 17);
        let h = Word::from_letters(&[2, 4, 1]);
        let a = Word::from_letters(&[1, 3, 3, 2, 4, 1, 1, 2, 3]);
        let b = Word::from_letters(&[3, 2, 1, 4, 4, 2, 1, 3, 3]);
        let tail = InfiniteWord::constant(2);
        let (pa, _) = t.project(&h.concat(&a), &tail, 12).unwrap();
        let (pb, _) = t.project(&h.concat(&b), &tail, 12).unwrap();
        let base = t.descend(&h).unwrap();
        let (qa, _) = t.project_from(&base, &a, &tail, 9).unwrap();
        let (qb, _) = t.project_from(&base, &b, &tail, 9).unwrap();
        for k in 0..2 {
            let lhs = (pa[k] - pb[k]).abs();
            let rhs = base.cum[k].abs() * (qa[k] - qb[k]).abs();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300));
        }
    }

    #[test]
    fn swapping_axis_streams_swaps_coordinates() {
        let spec = presets::four_corner();
        let mut swapped = spec.clone();
        for t in &mut swapped.translations {
            t.swap(0, 1);
        }
        swapped.axis_laws.swap(0, 1);
        let t1 = RealizationTree::realize(&spec, 9);
        let t2 = RealizationTree::realize(&swapped, 9).with_axis_streams(vec![1, 0]).unwrap();
        let w = Word::from_letters(&[4, 1, 3, 3, 2, 1]);
        let (p, _) = t1.project(&w, &InfiniteWord::constant(1), 6).unwrap();
        let (q, _) = t2.project(&w, &InfiniteWord::constant(1), 6).unwrap();
        assert_eq!(p[0], q[1]);
        assert_eq!(p[1], q[0]);
    }

    #[test]
    fn overrides_replace_ratios() {
        let spec = presets::four_corner();
        let t = RealizationTree::realize(&spec, 1);
        let w = Word::from_letters(&[2, 3]);
        let mut m = HashMap::new();
        m.insert(w.clone(), vec![0.2, 0.3]);
        let o = t.with_overrides(m);
        assert_eq!(o.ratios(&w).unwrap(), vec![0.2, 0.3]);
        let other = Word::from_letters(&[2, 4]);
        assert_eq!(o.ratios(&other).unwrap(), t.ratios(&other).unwrap());
    }

    #[test]
    fn validation_names_conditions() {
        let mut s = deterministic(0.5);
        s.translations = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        let e = s.validate().unwrap_err();
        assert!(matches!(e, Error::Invariant { condition: "non-singleton-translations", .. }));

        let e = deterministic(0.5).validate().unwrap_err();
        assert!(matches!(e, Error::Invariant { condition: "eventually-smooth-index", .. }));

        let mut s = presets::four_corner();
        s.separated_index = vec![2, 3];
        let e = s.validate().unwrap_err();
        assert!(matches!(e, Error::Invariant { condition: "distinct-separated-translation", .. }));

        let mut s = presets::four_corner();
        s.alpha_hi = Some(0.4);
        let e = s.validate().unwrap_err();
        assert!(matches!(e, Error::Invariant { condition: "modulus-bounds", .. }));

        let mut s = presets::four_corner();
        s.escape_block = Some(vec![1, 5]);
        assert!(s.validate().is_err());
        s.escape_block = Some(vec![4, 5]);
        s.validate().unwrap();
        assert_eq!(s.escape_lengths(), vec![4, 5]);
    }

    #[test]
    fn json_round_trip_and_schema_path() {
        for spec in presets::all() {
            let back = SpongeSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.hash_hex(), spec.hash_hex());
        }
        let bad = r#"{"d":1,"n":2,"translations":[[0],[1]],"axis_laws":[{"marginals":[{"kind":"uniform","a":"x","b":0.5}]}],"smooth_index":[1],"separated_index":[2]}"#;
        match SpongeSpec::from_json(bad).unwrap_err() {
            Error::Schema { path, .. } => assert!(path.contains("axis_laws[0].marginals[0]"), "{path}"),
            e => panic!("{e}"),
        }
    }
}
