//! Bundled systems.

use crate::distributions::{Constraint, Coupling, RatioLaw, RatioVectorLaw};
use crate::error::{Error, Result};
use crate::rifs::SpongeSpec;

pub const NAMES: [&str; 3] = ["example-line", "four-corner", "mod-four-corner"];

/// Three homotheties on the line: `f_1(x) = αx + (1 − α)` with `α` uniform on
/// `[1/3, 1/2]`, `f_2(x) = x/3`, `f_3(x) = x/4`.
pub fn example_line() -> SpongeSpec {
    SpongeSpec {
        name: Some("example-line".into()),
        d: 1,
        n: 3,
        translations: vec![vec![1.0], vec![0.0], vec![0.0]],
        axis_laws: vec![RatioVectorLaw::independent(vec![
            RatioLaw::uniform(1.0 / 3.0, 0.5),
            RatioLaw::constant(1.0 / 3.0),
            RatioLaw::constant(0.25),
        ])],
        alpha_lo: None,
        alpha_hi: None,
        smooth_index: vec![1],
        separated_index: vec![2],
        smooth_block: Some(vec![2]),
        escape_block: None,
    }
}

/// Random rectangles in the four corners of the unit square, every side
/// ratio uniform on `[1/10, 1/2]`, kept pairwise disjoint per level.
pub fn four_corner() -> SpongeSpec {
    let marginals = vec![RatioLaw::uniform(0.1, 0.5); 4];
    let axis = |groups: Vec<Vec<usize>>| RatioVectorLaw {
        marginals: marginals.clone(),
        coupling: Coupling::Joint {
            constraints: vec![Constraint::MaxSum { groups, bound: 1.0 }],
        },
    };
    SpongeSpec {
        name: Some("four-corner".into()),
        d: 2,
        n: 4,
        translations: vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]],
        axis_laws: vec![axis(vec![vec![1, 2], vec![3, 4]]), axis(vec![vec![1, 4], vec![2, 3]])],
        alpha_lo: None,
        alpha_hi: None,
        smooth_index: vec![1, 1],
        separated_index: vec![3, 3],
        smooth_block: Some(vec![2, 2]),
        escape_block: None,
    }
}

/// Aligned variant: children 1 and 3 share the horizontal ratio `α^{(1)}`,
/// children 2 and 4 share `α^{(2)}`; vertically, children 1 and 4 share
/// `α^{(3)}` and children 2 and 3 share `α^{(4)}`. All four are uniform on
/// `[1/10, 1/2]` with `α^{(1)} + α^{(2)} ≤ 1` and `α^{(3)} + α^{(4)} ≤ 1`.
pub fn mod_four_corner() -> SpongeSpec {
    let marginals = vec![RatioLaw::uniform(0.1, 0.5); 4];
    let pair_bound = vec![Constraint::MaxSum { groups: vec![vec![1], vec![2]], bound: 1.0 }];
    SpongeSpec {
        name: Some("mod-four-corner".into()),
        d: 2,
        n: 4,
        translations: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        axis_laws: vec![
            RatioVectorLaw {
                marginals: marginals.clone(),
                coupling: Coupling::SharedSlots { slots: vec![0, 1, 0, 1], constraints: pair_bound.clone() },
            },
            RatioVectorLaw {
                marginals,
                coupling: Coupling::SharedSlots { slots: vec![0, 1, 1, 0], constraints: pair_bound },
            },
        ],
        alpha_lo: None,
        alpha_hi: None,
        smooth_index: vec![1, 1],
        separated_index: vec![2, 2],
        smooth_block: Some(vec![2, 2]),
        escape_block: None,
    }
}

pub fn all() -> Vec<SpongeSpec> {
    vec![example_line(), four_corner(), mod_four_corner()]
}

pub fn by_name(name: &str) -> Result<SpongeSpec> {
    match name {
        "example-line" => Ok(example_line()),
        "four-corner" => Ok(four_corner()),
        "mod-four-corner" => Ok(mod_four_corner()),
        other => Err(Error::Argument(format!(
            "unknown preset `{other}` (available: {})",
            NAMES.join(", ")
        ))),
    }
}
