//! Singular value functions, expected pressure, and the dimension solvers.
//!
//! Permutations are 0-based internally (`sigma[m]` is the axis in position
//! `m`) and reported 1-based.

use serde::Serialize;

use crate::distributions::{batch_moment, law_id, MomentCache};
use crate::error::{Error, Result};
use crate::rifs::SpongeSpec;
use crate::symbolic::SubsystemSpec;

const MAX_ITERATIONS: usize = 200;

/// All permutations of `0..d` in lexicographic order.
pub fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..d).collect();
    loop {
        out.push(p.clone());
        // Next lexicographic permutation.
        let Some(i) = (1..d).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..d).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// Exponent carried by each axis under `sigma` at level `s`.
///
/// For `s ≤ d` the axis in position `m` (1-based) gets 1 when `m ≤ ⌊s⌋`,
/// `s − ⌊s⌋` when `m = ⌈s⌉`, else 0; for `s > d` every axis gets `s/d`.
pub fn exponents(sigma: &[usize], s: f64) -> Vec<f64> {
    let d = sigma.len();
    let mut w = vec![0.0; d];
    if s > d as f64 {
        w.iter_mut().for_each(|x| *x = s / d as f64);
        return w;
    }
    let whole = s.floor();
    let frac = s - whole;
    for (m, &axis) in sigma.iter().enumerate() {
        let pos = (m + 1) as f64;
        w[axis] = if pos <= whole {
            1.0
        } else if pos == whole + 1.0 {
            frac
        } else {
            0.0
        };
    }
    w
}

/// Exponents of [`exponents`] together with their permutation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PermutationWeights {
    pub sigma: Vec<usize>,
    pub s: f64,
    pub w: Vec<f64>,
}

impl PermutationWeights {
    pub fn new(sigma: Vec<usize>, s: f64) -> Self {
        let w = exponents(&sigma, s);
        PermutationWeights { sigma, s, w }
    }

    /// `φ_σ^s` of a diagonal with the given (signed) entries; also the
    /// cumulative `φ̄_σ^s` when given cumulative ratios.
    pub fn phi(&self, ratios: &[f64]) -> f64 {
        phi_with(&self.sigma, &self.w, ratios)
    }
}

fn phi_with(sigma: &[usize], w: &[f64], ratios: &[f64]) -> f64 {
    let mut v = 1.0;
    for &axis in sigma {
        if w[axis] != 0.0 {
            v *= ratios[axis].abs().powf(w[axis]);
        }
    }
    v
}

pub fn phi_sigma_s(ratios: &[f64], sigma: &[usize], s: f64) -> f64 {
    phi_with(sigma, &exponents(sigma, s), ratios)
}

/// `ψ^s` of a word given its per-level ratio lists, with the maximizing
/// permutation (lexicographically smallest on ties).
pub fn psi_s(levels: &[Vec<f64>], s: f64) -> (f64, Vec<usize>) {
    let d = levels.first().map_or(0, |l| l.len());
    let mut cum = vec![1.0; d];
    for l in levels {
        for k in 0..d {
            cum[k] *= l[k];
        }
    }
    psi_cumulative(&cum, s)
}

/// `ψ^s` from the cumulative ratios `ᾱ^{(k)}` directly.
pub fn psi_cumulative(cum: &[f64], s: f64) -> (f64, Vec<usize>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for sigma in permutations(cum.len()) {
        let v = phi_sigma_s(cum, &sigma, s);
        if v > best.0 {
            best = (v, sigma);
        }
    }
    best
}

/// `E|α_i^{(k)}|^w` for every child and axis, memoized.
pub struct PressureModel {
    d: usize,
    n: usize,
    ids: Vec<u64>,
    batches: Vec<Option<Vec<Vec<f64>>>>,
    spec: SpongeSpec,
    cache: MomentCache,
}

impl PressureModel {
    pub fn new(spec: &SpongeSpec) -> Result<Self> {
        let (_, hi) = spec.alpha_bounds();
        if hi >= 1.0 {
            return Err(Error::NonContraction { alpha_hi: hi });
        }
        let mut ids = Vec::new();
        let mut batches = Vec::new();
        for (k, law) in spec.axis_laws.iter().enumerate() {
            batches.push(if law.constraints_vacuous() {
                None
            } else {
                Some(law.conditional_batch()?)
            });
            for j in 0..spec.n {
                ids.push(law_id(law, (k * spec.n + j) as u64));
            }
        }
        Ok(PressureModel {
            d: spec.d,
            n: spec.n,
            ids,
            batches,
            spec: spec.clone(),
            cache: MomentCache::new(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `E|α_child^{(axis)}|^w`, 0-based child.
    pub fn moment(&self, child: usize, axis: usize, w: f64) -> f64 {
        if w == 0.0 {
            return 1.0;
        }
        let id = self.ids[axis * self.n + child];
        self.cache
            .get_or_compute(id, w, || {
                Ok(match &self.batches[axis] {
                    Some(b) => batch_moment(&b[child], w),
                    None => self.spec.axis_laws[axis].marginals[child].moment(w),
                })
            })
            .expect("moment computation is infallible")
    }

    /// `E φ_σ^s(A_child)`, using independence across axes.
    pub fn expected_phi(&self, child: usize, sigma: &[usize], w: &[f64]) -> f64 {
        let mut v = 1.0;
        for &axis in sigma {
            v *= self.moment(child, axis, w[axis]);
        }
        v
    }

    /// `Σ_i E φ_σ^s(A_i)`.
    pub fn pressure_sigma(&self, sigma: &[usize], s: f64) -> f64 {
        let w = exponents(sigma, s);
        (0..self.n).map(|i| self.expected_phi(i, sigma, &w)).sum()
    }

    /// `F(s)` and its maximizing permutation.
    pub fn pressure(&self, s: f64) -> (f64, Vec<usize>) {
        self.max_over_sigma(|sigma| self.pressure_sigma(sigma, s))
    }

    /// `Σ_{𝚒∈𝒥_n} E φ̄_σ^s(𝚒)` and its maximizing permutation.
    pub fn subsystem_pressure(&self, sub: &SubsystemSpec, s: f64) -> (f64, Vec<usize>) {
        self.max_over_sigma(|sigma| {
            let w = exponents(sigma, s);
            let mut v = self.pressure_sigma(sigma, s).powi(sub.n as i32);
            for (l, k) in sub.smoothing.iter().zip(&sub.escape) {
                v *= self
                    .expected_phi(k.letter as usize - 1, sigma, &w)
                    .powi(k.len as i32);
                v *= self
                    .expected_phi(l.letter as usize - 1, sigma, &w)
                    .powi(l.len as i32);
            }
            v
        })
    }

    fn max_over_sigma(&self, f: impl Fn(&[usize]) -> f64) -> (f64, Vec<usize>) {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for sigma in permutations(self.d) {
            let v = f(&sigma);
            if v > best.0 {
                best = (v, sigma);
            }
        }
        best
    }
}

/// `F(s)` with its maximizing permutation (0-based).
pub fn expected_pressure(spec: &SpongeSpec, s: f64) -> Result<(f64, Vec<usize>)> {
    Ok(PressureModel::new(spec)?.pressure(s))
}

/// One bisection step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketStep {
    pub lo: f64,
    pub hi: f64,
    pub s: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionReport {
    pub s_star: f64,
    /// `F(s_star) − 1`.
    pub residual: f64,
    pub tolerance: f64,
    /// Maximizing permutation at the root, 1-based.
    pub permutation: Vec<usize>,
    pub evaluations: usize,
    pub bracket: Vec<BracketStep>,
    /// Subsystem block length, when solving for `s_n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsystem_n: Option<usize>,
}

impl DimensionReport {
    /// Maximizing permutation, 0-based.
    pub fn sigma(&self) -> Vec<usize> {
        self.permutation.iter().map(|m| m - 1).collect()
    }
}

/// Bisection for the root of a strictly decreasing `g` with `g(0) > 1`.
fn bisect(d: usize, tol: f64, g: impl Fn(f64) -> (f64, Vec<usize>)) -> Result<DimensionReport> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let mut evaluations = 0;
    let mut eval = |s: f64| {
        evaluations += 1;
        g(s)
    };
    let mut hi = d as f64;
    let mut upper = eval(hi);
    while upper.0 >= 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numeric(format!("could not bracket the root below {hi}")));
        }
        upper = eval(hi);
    }
    let mut lo = 0.0;
    let mut bracket = Vec::new();
    let mut last = (hi, upper);
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let (value, sigma) = eval(mid);
        if !value.is_finite() {
            return Err(Error::Numeric(format!("pressure is not finite at s = {mid}")));
        }
        bracket.push(BracketStep { lo, hi, s: mid, value });
        last = (mid, (value, sigma));
        if value > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let tiny = hi - lo <= 4.0 * f64::EPSILON * mid.max(1.0);
        if (value - 1.0).abs() <= tol || tiny {
            break;
        }
    }
    let (s_star, (value, sigma)) = last;
    if (value - 1.0).abs() > tol && hi - lo > tol * s_star.max(1.0) {
        return Err(Error::Numeric(format!(
            "bisection did not converge: residual {} at s = {s_star}",
            value - 1.0
        )));
    }
    Ok(DimensionReport {
        s_star,
        residual: value - 1.0,
        tolerance: tol,
        permutation: sigma.iter().map(|m| m + 1).collect(),
        evaluations,
        bracket,
        subsystem_n: None,
    })
}

/// Solves `max_σ Σ_i E φ_σ^s(A_i) = 1`.
pub fn solve_s0(spec: &SpongeSpec, tol: f64) -> Result<DimensionReport> {
    let model = PressureModel::new(spec)?;
    bisect(spec.d, tol, |s| model.pressure(s))
}

/// Solves `max_σ Σ_{𝚒∈𝒥_n} E φ̄_σ^s(𝚒) = 1` for the subsystem `sub`.
pub fn solve_sn(spec: &SpongeSpec, sub: &SubsystemSpec, tol: f64) -> Result<DimensionReport> {
    let model = PressureModel::new(spec)?;
    let mut r = bisect(spec.d, tol, |s| model.subsystem_pressure(sub, s))?;
    r.subsystem_n = Some(sub.n);
    Ok(r)
}

/// `(s, F(s))` on a uniform grid over `[0, s_max]`.
pub fn pressure_curve(spec: &SpongeSpec, s_max: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    let model = PressureModel::new(spec)?;
    let points = points.max(2);
    Ok((0..points)
        .map(|i| {
            let s = s_max * i as f64 / (points - 1) as f64;
            (s, model.pressure(s).0)
        })
        .collect())
}
