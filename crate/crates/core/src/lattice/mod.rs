//! Multi-indices, axis subsets, sparse coefficient fields over `Z^d` and the
//! shift/difference operator algebra acting on them.

mod field;
pub mod grid;
mod index;
mod rules;

pub use field::{CoefficientField, Orientation};
pub use index::{BoxPoints, MultiIndex, SubsetMask, MAX_DIMENSION};
pub use rules::{dyadic_weight, GeneratorRule, RuleKind, DYADIC_MAX_BLOCKS, MATERIALIZE_BUDGET};
