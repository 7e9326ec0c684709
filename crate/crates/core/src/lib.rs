//! Splitting linear random fields on Z^d into orthomartingale and coboundary parts.
//!
//! A linear field is stored through its coefficients `a_{k,j}` in
//! `f = sum_k sum_j a_{k,j} U_{-j} e_k` ([`CoefficientField`]). On top of that
//! the crate provides
//!
//! * [`decomposition`]: the transfer functions `g_S` with
//!   `f = sum_S prod_{q not in S} (I - U_{e_q}) g_S`, and reconstruction;
//! * [`conditions`]: partial sums of the orthant-tail, projection-norm and
//!   weighted conditions governing existence of that representation;
//! * [`fieldsim`]: iid innovations on finite boxes with counter-based seeding;
//! * [`limits`]: Monte Carlo checks of the invariance principle and of the
//!   moment, tail and Orlicz bounds for partial sums.

pub mod conditions;
pub mod decomposition;
pub mod error;
pub mod fieldsim;
pub mod lattice;
pub mod limits;

pub use error::{Error, Result};
pub use lattice::{CoefficientField, GeneratorRule, MultiIndex, Orientation, SubsetMask};
