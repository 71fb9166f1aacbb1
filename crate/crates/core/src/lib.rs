//! Greedy sensor placement for linear inverse problems.
//!
//! A field `f = Φg` (`Φ` is N×K) is observed at a subset `S` of its `N`
//! locations with i.i.d. noise, and `g` is recovered by least squares. The
//! expected error of that estimate is `σ²·Tr[(CΦ)ᵀ(CΦ)]⁻¹`, so choosing `S`
//! is an A-optimal design problem. [`placement::fmbs_select`] solves a
//! shifted version of it greedily using only vector-vector products per
//! candidate.
//!
//! ```
//! use fmbs_core::{linalg::Matrix, placement::fmbs_select};
//!
//! let phi = Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
//! let result = fmbs_select(&phi, 2, 1e-4).unwrap();
//! assert_eq!(result.set.indices(), [0, 1]);
//! ```

// `!(x > y)` is how NaN gets rejected; index loops mirror the algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod inverse;
pub mod linalg;
pub mod matgen;
pub mod placement;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use matgen::{generate, Model, ModelSpec};
pub use placement::{Method, PlacementResult, SampleSet};
