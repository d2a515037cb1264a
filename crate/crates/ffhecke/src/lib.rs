//! Exact slope combinatorics of rank-`n` vector bundle classes.
//!
//! The crate works entirely in exact rational arithmetic and provides:
//!
//! - [`slope`]: canonical slope decompositions, Newton polygons, duality,
//!   twists, dominance order, and exhaustive enumeration of concave integral
//!   polygons in a slope window.
//! - [`levi`]: block data for products of general linear factors, integer
//!   characters, the bundle attached to a character, and the inverse problem
//!   of listing all characters matching a bundle.
//! - [`modifications`]: existence and enumeration of colength-one
//!   modifications, reducibility classification with verified two-block
//!   witnesses, and the integer shift of the parabolic transport.
//! - [`hecke`]: category labels for stalk bookkeeping, the stalk map on
//!   labels, and greedy factorization of positive characters into elementary
//!   steps.
//! - [`certifier`]: a recursive case-analysis engine that emits
//!   machine-checkable derivation traces, and an independent checker that
//!   re-verifies every recorded number.
//!
//! No floating point is used anywhere; all slope comparisons are exact.

pub mod certifier;
pub mod hecke;
pub mod levi;
pub mod modifications;
pub mod slope;

pub use levi::{Character, LeviDatum, Permutation};
pub use modifications::{ModType, ReductionDatum, ReductionKind};
pub use slope::{Bundle, ExtendedSlope, IsoclinicPiece, NewtonPolygon, Rat};
