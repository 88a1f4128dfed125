use serde::Serialize;

use crate::error::{Error, Result};
use crate::rifs::{Cursor, RealizationTree};

#[derive(Clone, Debug, Serialize)]
pub struct CylinderCover {
    pub n: usize,
    pub s: f64,
    /// Index `ℓ` (1-based) of the axis order used for stopping.
    pub ell: usize,
    /// `|C_n|`.
    pub stopping_set: u64,
    /// `A_n = 2 Σ_{𝚒∈C_n} ∏_{m<ℓ} |ᾱ_𝚒^{σ(m)}|/|ᾱ_𝚒^{σ(ℓ)}|`.
    pub a_n: f64,
    /// `A_n · ᾱ^{ns}`.
    pub scaled: f64,
    /// Whether `A_n · ᾱ^{ns} ≤ 1`.
    pub holds: bool,
    /// Integer `m_n ≤ n` with `α̲^{m_n} ≤ ᾱ^n < α̲^{m_n − 1}`.
    pub m_n: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Covering radius `√d·ᾱ^n`.
    pub radius: f64,
}

/// `ℓ` with `ℓ − 1 < s ≤ ℓ`, kept within `1..=d`.
pub fn ell_for(s: f64, d: usize) -> usize {
    (s.ceil() as usize).clamp(1, d)
}

/// The stopping set `C_n` of words whose `σ_𝚒(ℓ)`-th cumulative ratio
/// first drops to `ᾱ^n`, where `σ_𝚒` attains `ψ^s(𝚒)`, and the covering
/// bound `A_n` built on it. Errors when more than `cap` nodes are visited.
pub fn cylinder_cover_bound(tree: &RealizationTree, n: usize, s: f64, cap: u64) -> Result<CylinderCover> {
    cover(tree, n, s, cap, false)
}

/// Whether `A_n·ᾱ^{ns} > 1`, stopping the enumeration as soon as the
/// partial sum exceeds 1.
pub fn cylinder_cover_exceeds(tree: &RealizationTree, n: usize, s: f64, cap: u64) -> Result<bool> {
    Ok(!cover(tree, n, s, cap, true)?.holds)
}

fn cover(tree: &RealizationTree, n: usize, s: f64, cap: u64, early: bool) -> Result<CylinderCover> {
    let spec = tree.spec();
    let d = spec.d;
    let (lo, hi) = spec.alpha_bounds();
    let threshold = hi.powi(n as i32);
    let ell = ell_for(s, d);
    let mut out = CylinderCover {
        n,
        s,
        ell,
        stopping_set: 0,
        a_n: 0.0,
        scaled: 0.0,
        holds: false,
        m_n: m_n(lo, hi, n),
        min_len: usize::MAX,
        max_len: 0,
        radius: (d as f64).sqrt() * threshold,
    };
    let limit = hi.powf(-(n as f64) * s);
    let mut visited = 1u64;
    let mut sorted = vec![0.0; d];
    let mut stack: Vec<Cursor> = vec![tree.root()];
    while let Some(c) = stack.pop() {
        let table = tree.children(&c)?;
        for j in (1..=spec.n as u8).rev() {
            visited += 1;
            if visited > cap {
                return Err(Error::Budget {
                    what: "cylinder cover nodes",
                    requested: visited as u128,
                    cap: cap as u128,
                });
            }
            // The maximizing order in ψ^s sorts the axes by decreasing ratio.
            for (k, v) in sorted.iter_mut().enumerate() {
                *v = (c.cum[k] * table.get(j as usize - 1, k)).abs();
            }
            sorted.sort_by(|a, b| b.total_cmp(a));
            let stop = sorted[ell - 1];
            if stop <= threshold {
                out.a_n += 2.0 * sorted[..ell - 1].iter().map(|a| a / stop).product::<f64>();
                out.stopping_set += 1;
                let len = c.word.len() + 1;
                out.min_len = out.min_len.min(len);
                out.max_len = out.max_len.max(len);
                if early && out.a_n > limit {
                    stack.clear();
                    break;
                }
            } else {
                stack.push(tree.step(&c, &table, j));
            }
        }
    }
    out.scaled = out.a_n * hi.powf(n as f64 * s);
    out.holds = out.scaled <= 1.0;
    Ok(out)
}

fn m_n(lo: f64, hi: f64, n: usize) -> usize {
    let t = hi.powi(n as i32);
    let mut m = 1;
    while m < n && lo.powi(m as i32) > t {
        m += 1;
    }
    m
}
