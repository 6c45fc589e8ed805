//! Models shipped with the crate.

use crate::model::UncertainGrn;

/// Two proteins, four extremal systems, a sliding facet on `x2 = 1`.
///
/// `f^λ = (2λ1 + 2λ2 + 3λ3 + 3λ4, (2λ1 + 3λ2 + 2λ3 + 3λ4) s)` with
/// `s = s⁻(x1, 1) s⁻(x2, 1)` and `C = I`.
pub const SLIDING_EXAMPLE_JSON: &str = include_str!("../data/sliding_example.json");

pub fn sliding_example() -> UncertainGrn {
    UncertainGrn::from_json(SLIDING_EXAMPLE_JSON).expect("bundled model is valid")
}
