//! Support-function flows of convex hypersurfaces and the functionals attached
//! to them.

// `!(x > 0.0)` rejects NaN along with nonpositive values; index loops mirror
// the grid formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod batch;
pub mod body;
pub mod corpus;
pub mod curvature;
pub mod error;
pub mod flow;
pub mod forcing;
pub mod functionals;
pub mod grid;
pub mod numeric;
pub mod stationary;

pub use error::{Error, Result};
