//! Laws of the random contraction ratios.
//!
//! A [`RatioLaw`] is the law of one signed ratio; a [`RatioVectorLaw`] is the
//! joint law of the `N` ratios a node hands to its children on one axis.
//! Dimension formulas only ever see `|α|`; signs matter for rendering.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Mutex;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::{self, Key, StreamRng};
use crate::quadrature;

/// Default attempt cap for rejection sampling of constrained vectors.
pub const REJECTION_CAP: u64 = 1_000_000;

/// Accepted draws used to estimate conditional moments when a joint
/// constraint can actually reject.
const CONDITIONAL_MOMENT_DRAWS: u64 = 1 << 16;

fn uniform01(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioLaw {
    Constant { c: f64 },
    Uniform { a: f64, b: f64 },
    /// `log|α|` uniform between `log|a|` and `log|b|`.
    LogUniform { a: f64, b: f64 },
    Atoms { values: Vec<f64>, probs: Vec<f64> },
    /// Piecewise-linear density through equally spaced samples on `[a, b]`.
    DensityGrid { a: f64, b: f64, density: Vec<f64> },
}

impl RatioLaw {
    pub fn uniform(a: f64, b: f64) -> Self {
        RatioLaw::Uniform { a, b }
    }

    pub fn constant(c: f64) -> Self {
        RatioLaw::Constant { c }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x.is_finite() && x != 0.0 && x.abs() < 1.0;
        let interval = |a: f64, b: f64| -> Result<()> {
            if !(open_unit(a) && open_unit(b)) || a >= b || a.signum() != b.signum() {
                return Err(Error::invariant(
                    "ratio-modulus-bounds",
                    format!("interval [{a}, {b}] must satisfy a < b, share a sign, and 0 < |a|,|b| < 1"),
                ));
            }
            Ok(())
        };
        match self {
            RatioLaw::Constant { c } => {
                if !open_unit(*c) {
                    return Err(Error::invariant(
                        "ratio-modulus-bounds",
                        format!("constant ratio {c} must satisfy 0 < |c| < 1"),
                    ));
                }
            }
            RatioLaw::Uniform { a, b } | RatioLaw::LogUniform { a, b } => interval(*a, *b)?,
            RatioLaw::Atoms { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::invariant(
                        "atoms-shape",
                        "values and probs must be non-empty and of equal length",
                    ));
                }
                if let Some(v) = values.iter().find(|v| !open_unit(**v)) {
                    return Err(Error::invariant(
                        "ratio-modulus-bounds",
                        format!("atom {v} must satisfy 0 < |v| < 1"),
                    ));
                }
                let s0 = values[0].signum();
                if values.iter().any(|v| v.signum() != s0) {
                    return Err(Error::invariant("ratio-sign", "atoms must share one sign"));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::invariant("atoms-probabilities", "negative probability"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invariant(
                        "atoms-probabilities",
                        format!("probabilities sum to {total}, not 1"),
                    ));
                }
            }
            RatioLaw::DensityGrid { a, b, density } => {
                interval(*a, *b)?;
                if density.len() < 2 || density.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                    return Err(Error::invariant(
                        "density-grid",
                        "need at least two non-negative density samples",
                    ));
                }
                let h = (b - a) / (density.len() - 1) as f64;
                let mass: f64 = density.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).sum();
                if (mass - 1.0).abs() > 1e-9 {
                    return Err(Error::invariant(
                        "density-grid",
                        format!("density integrates to {mass}, not 1"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `(min |α|, max |α|)` over the support.
    pub fn abs_bounds(&self) -> (f64, f64) {
        match self {
            RatioLaw::Constant { c } => (c.abs(), c.abs()),
            RatioLaw::Uniform { a, b }
            | RatioLaw::LogUniform { a, b }
            | RatioLaw::DensityGrid { a, b, .. } => {
                (a.abs().min(b.abs()), a.abs().max(b.abs()))
            }
            RatioLaw::Atoms { values, .. } => values
                .iter()
                .map(|v| v.abs())
                .fold((f64::INFINITY, 0.0), |(lo, hi), v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            RatioLaw::Constant { c } => *c > 0.0,
            RatioLaw::Uniform { a, .. }
            | RatioLaw::LogUniform { a, .. }
            | RatioLaw::DensityGrid { a, .. } => *a > 0.0,
            RatioLaw::Atoms { values, .. } => values.iter().all(|v| *v > 0.0),
        }
    }

    /// Whether the law has a density.
    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            RatioLaw::Uniform { .. } | RatioLaw::LogUniform { .. } | RatioLaw::DensityGrid { .. }
        )
    }

    fn sign(&self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            -1.0
        }
    }

    /// Grid law re-expressed on `|α|`: `(lo, hi, density)` ascending.
    fn abs_grid(a: f64, b: f64, density: &[f64]) -> (f64, f64, Vec<f64>) {
        if a > 0.0 {
            (a, b, density.to_vec())
        } else {
            (-b, -a, density.iter().rev().copied().collect())
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            RatioLaw::Constant { c } => *c,
            RatioLaw::Uniform { a, b } => a + (b - a) * uniform01(rng),
            RatioLaw::LogUniform { a, b } => {
                let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
                self.sign() * (lo.ln() + (hi.ln() - lo.ln()) * uniform01(rng)).exp()
            }
            RatioLaw::Atoms { values, probs } => {
                let u = uniform01(rng);
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
            RatioLaw::DensityGrid { a, b, density } => {
                let (lo, hi, g) = Self::abs_grid(*a, *b, density);
                let h = (hi - lo) / (g.len() - 1) as f64;
                let masses: Vec<f64> = g.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).collect();
                let total: f64 = masses.iter().sum();
                let mut u = uniform01(rng) * total;
                let mut cell = masses.len() - 1;
                for (i, m) in masses.iter().enumerate() {
                    if u < *m {
                        cell = i;
                        break;
                    }
                    u -= m;
                }
                // Invert the quadratic cumulative mass within the cell.
                let (f0, f1) = (g[cell], g[cell + 1]);
                let slope = (f1 - f0) / h;
                let target = u.min(masses[cell]);
                let x = if slope.abs() < 1e-12 * (f0 + f1 + 1e-300) {
                    if f0 > 0.0 {
                        target / f0
                    } else {
                        0.5 * h
                    }
                } else {
                    (-f0 + (f0 * f0 + 2.0 * slope * target).max(0.0).sqrt()) / slope
                };
                self.sign() * (lo + (cell as f64) * h + x.clamp(0.0, h))
            }
        }
    }

    /// `E|α|^w` for `w ≥ 0`.
    pub fn moment(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 1.0;
        }
        match self {
            RatioLaw::Constant { c } => c.abs().powf(w),
            RatioLaw::Uniform { a, b } => {
                let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
                (hi.powf(w + 1.0) - lo.powf(w + 1.0)) / ((w + 1.0) * (hi - lo))
            }
            RatioLaw::LogUniform { a, b } => {
                let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
                (hi.powf(w) - lo.powf(w)) / (w * (hi / lo).ln())
            }
            RatioLaw::Atoms { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| p * v.abs().powf(w))
                .sum(),
            RatioLaw::DensityGrid { a, b, density } => {
                let (lo, hi, g) = Self::abs_grid(*a, *b, density);
                let h = (hi - lo) / (g.len() - 1) as f64;
                (0..g.len() - 1)
                    .map(|i| {
                        let x0 = lo + i as f64 * h;
                        let (f0, f1) = (g[i], g[i + 1]);
                        quadrature::integrate(x0, x0 + h, |x| {
                            x.powf(w) * (f0 + (f1 - f0) * (x - x0) / h)
                        })
                    })
                    .sum()
            }
        }
    }

    /// `P(|α| ≤ x)`.
    pub fn abs_cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.abs_bounds();
        match self {
            RatioLaw::Constant { .. } => {
                if x >= lo {
                    1.0
                } else {
                    0.0
                }
            }
            RatioLaw::Uniform { .. } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            RatioLaw::LogUniform { .. } => {
                if x <= lo {
                    0.0
                } else {
                    ((x.ln() - lo.ln()) / (hi.ln() - lo.ln())).clamp(0.0, 1.0)
                }
            }
            RatioLaw::Atoms { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| v.abs() <= x)
                .map(|(_, p)| p)
                .sum(),
            RatioLaw::DensityGrid { a, b, density } => {
                let (lo, hi, g) = Self::abs_grid(*a, *b, density);
                if x <= lo {
                    return 0.0;
                }
                if x >= hi {
                    return 1.0;
                }
                let h = (hi - lo) / (g.len() - 1) as f64;
                let cell = (((x - lo) / h) as usize).min(g.len() - 2);
                let full: f64 = g[..=cell]
                    .windows(2)
                    .map(|p| 0.5 * h * (p[0] + p[1]))
                    .sum();
                let t = x - (lo + cell as f64 * h);
                let (f0, f1) = (g[cell], g[cell + 1]);
                full + f0 * t + 0.5 * (f1 - f0) / h * t * t
            }
        }
    }
}

/// Maximal-sum constraint `Σ_g max_{i ∈ g} |α_i| ≤ bound` over groups of
/// 1-based child indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    MaxSum { groups: Vec<Vec<usize>>, bound: f64 },
}

impl Constraint {
    pub fn holds(&self, v: &[f64]) -> bool {
        match self {
            Constraint::MaxSum { groups, bound } => {
                let total: f64 = groups
                    .iter()
                    .map(|g| g.iter().map(|&i| v[i - 1].abs()).fold(0.0, f64::max))
                    .sum();
                total <= *bound
            }
        }
    }

    /// True when the constraint holds at the supremum of every support, so
    /// it never rejects.
    fn vacuous(&self, marginals: &[RatioLaw]) -> bool {
        let hi: Vec<f64> = marginals.iter().map(|m| m.abs_bounds().1).collect();
        self.holds(&hi)
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Constraint::MaxSum { groups, bound } => {
                if !bound.is_finite() || groups.iter().flatten().any(|&i| i == 0 || i > n) {
                    return Err(Error::invariant(
                        "joint-constraint",
                        format!("groups must use child indices in 1..={n} and a finite bound"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// Children draw independently from their marginals.
    #[default]
    Independent,
    /// Children with equal slot labels receive the same draw.
    SharedSlots {
        slots: Vec<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        constraints: Vec<Constraint>,
    },
    /// Independent draws, resampled until every constraint holds.
    Joint { constraints: Vec<Constraint> },
}

/// Joint law of the ratio vector `(α_{𝚒1}, ..., α_{𝚒N})` on one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioVectorLaw {
    pub marginals: Vec<RatioLaw>,
    #[serde(default)]
    pub coupling: Coupling,
}

impl RatioVectorLaw {
    pub fn independent(marginals: Vec<RatioLaw>) -> Self {
        RatioVectorLaw {
            marginals,
            coupling: Coupling::Independent,
        }
    }

    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    fn constraints(&self) -> &[Constraint] {
        match &self.coupling {
            Coupling::Independent => &[],
            Coupling::SharedSlots { constraints, .. } | Coupling::Joint { constraints } => {
                constraints
            }
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.marginals.len() != n {
            return Err(Error::invariant(
                "vector-law-shape",
                format!("expected {n} marginals, got {}", self.marginals.len()),
            ));
        }
        for m in &self.marginals {
            m.validate()?;
        }
        if let Coupling::SharedSlots { slots, .. } = &self.coupling {
            if slots.len() != n {
                return Err(Error::invariant(
                    "shared-slots",
                    format!("expected {n} slot labels, got {}", slots.len()),
                ));
            }
            for i in 0..n {
                for j in 0..i {
                    if slots[i] == slots[j] && self.marginals[i] != self.marginals[j] {
                        return Err(Error::invariant(
                            "shared-slots",
                            format!("children {} and {} share a slot but have different marginals", j + 1, i + 1),
                        ));
                    }
                }
            }
        }
        for c in self.constraints() {
            c.validate(n)?;
        }
        Ok(())
    }

    /// Whether the constraint region can ever reject a candidate draw.
    pub fn constraints_vacuous(&self) -> bool {
        self.constraints().iter().all(|c| c.vacuous(&self.marginals))
    }

    fn draw_candidate(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match &self.coupling {
            Coupling::SharedSlots { slots, .. } => {
                let mut drawn: Vec<(usize, f64)> = Vec::with_capacity(slots.len());
                slots
                    .iter()
                    .zip(&self.marginals)
                    .map(|(slot, law)| match drawn.iter().find(|(s, _)| s == slot) {
                        Some((_, v)) => *v,
                        None => {
                            let v = law.sample(rng);
                            drawn.push((*slot, v));
                            v
                        }
                    })
                    .collect()
            }
            _ => self.marginals.iter().map(|m| m.sample(rng)).collect(),
        }
    }

    pub fn sample_with_cap(&self, rng: &mut dyn RngCore, cap: u64) -> Result<Vec<f64>> {
        let constraints = self.constraints();
        for _ in 0..cap.max(1) {
            let v = self.draw_candidate(rng);
            if constraints.iter().all(|c| c.holds(&v)) {
                return Ok(v);
            }
        }
        Err(Error::RejectionFailure { attempts: cap })
    }

    /// One draw of the vector, a deterministic function of `key`.
    pub fn sample_vector(&self, key: &Key) -> Result<Vec<f64>> {
        self.sample_with_cap(&mut StreamRng::new(*key), REJECTION_CAP)
    }

    /// `E|α_child|^w` under the joint law (0-based `child`).
    ///
    /// Exact whenever the constraints never reject; otherwise estimated from
    /// a fixed, seed-independent batch of accepted draws.
    pub fn child_moment(&self, child: usize, w: f64) -> Result<f64> {
        if self.constraints_vacuous() {
            return Ok(self.marginals[child].moment(w));
        }
        let batch = self.conditional_batch()?;
        Ok(batch_moment(&batch[child], w))
    }

    /// `|α_j|` for a fixed batch of accepted draws, one column per child.
    pub fn conditional_batch(&self) -> Result<Vec<Vec<f64>>> {
        let base = keys::root_key(0x5eed_c0de);
        let mut cols = vec![Vec::with_capacity(CONDITIONAL_MOMENT_DRAWS as usize); self.len()];
        for i in 0..CONDITIONAL_MOMENT_DRAWS {
            let v = self.sample_vector(&keys::derive(&base, b"conditional-moment", i))?;
            for (c, x) in cols.iter_mut().zip(v) {
                c.push(x.abs());
            }
        }
        Ok(cols)
    }
}

/// Empirical `E x^w` over a batch of moduli.
pub fn batch_moment(batch: &[f64], w: f64) -> f64 {
    if w == 0.0 {
        return 1.0;
    }
    batch.iter().map(|x| x.powf(w)).sum::<f64>() / batch.len() as f64
}

/// Stable identifier of a serializable law, for cache keys.
pub fn law_id<T: Serialize>(law: &T, salt: u64) -> u64 {
    let json = serde_json::to_string(law).unwrap_or_default();
    let mut h = std::collections::hash_map::DefaultHasher::new();
    json.hash(&mut h);
    salt.hash(&mut h);
    h.finish()
}

/// Memo table for moments keyed by `(law id, w rounded to 1e-14)`.
#[derive(Debug, Default)]
pub struct MomentCache {
    map: Mutex<HashMap<(u64, i64), f64>>,
}

impl MomentCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&self, id: u64, w: f64, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        let key = (id, (w * 1e14).round() as i64);
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = compute()?;
        self.map.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Output of [`convolution_smoothness_proxy`].
#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    pub folds: usize,
    /// Left edge of the first cell, on the `log|α|` scale.
    pub origin: f64,
    pub step: f64,
    pub density: Vec<f64>,
    /// Largest jump between neighbouring cells, including the drop to zero
    /// outside the support.
    pub max_jump: f64,
}

/// Discretizes the law of `log|α|` into `grid` cells, convolves it with
/// itself `folds - 1` times and reports the largest discrete jump of the
/// resulting density. A continuity proxy only.
pub fn convolution_smoothness_proxy(law: &RatioLaw, folds: usize, grid: usize) -> SmoothnessReport {
    let folds = folds.max(1);
    let grid = grid.max(2);
    let (lo, hi) = law.abs_bounds();
    let (l0, l1) = (lo.ln(), hi.ln());
    // Degenerate supports still get a nominal unit-width window.
    let span = if l1 > l0 { l1 - l0 } else { 1.0 };
    let step = span / grid as f64;
    let start = if l1 > l0 { l0 } else { l0 - 0.5 };
    let cdf = |l: f64| law.abs_cdf(l.exp());
    let base: Vec<f64> = (0..grid)
        .map(|i| {
            let a = start + i as f64 * step;
            let b = a + step;
            let upper = if i + 1 == grid { 1.0 } else { cdf(b) };
            let lower = if i == 0 { 0.0 } else { cdf(a) };
            (upper - lower).max(0.0)
        })
        .collect();
    let mut masses = base.clone();
    for _ in 1..folds {
        let mut next = vec![0.0; masses.len() + base.len() - 1];
        for (i, m) in masses.iter().enumerate() {
            if *m == 0.0 {
                continue;
            }
            for (j, b) in base.iter().enumerate() {
                next[i + j] += m * b;
            }
        }
        masses = next;
    }
    let density: Vec<f64> = masses.iter().map(|m| m / step).collect();
    let mut max_jump = density[0].max(*density.last().unwrap());
    for p in density.windows(2) {
        max_jump = max_jump.max((p[1] - p[0]).abs());
    }
    SmoothnessReport {
        folds,
        origin: folds as f64 * start,
        step,
        density,
        max_jump,
    }
}
