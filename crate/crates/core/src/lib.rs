//! Lebesgue numbers of open covers under iteration of a self-map on finite
//! metric spaces.
//!
//! The crate measures how fast the Lebesgue number of the iterated cover
//! `U ∨ f⁻¹U ∨ … ∨ f⁻⁽ⁿ⁻¹⁾U` shrinks, and relates that decay rate to
//! topological entropy (via minimal subcovers and separated sets), to box
//! dimension and to Lipschitz constants of the iterates.
//!
//! Everything runs on finite models: [`FiniteMetricSpace`] holds the points,
//! [`Cover`] a family of point sets, [`DynMap`] a total self-map. Asymptotic
//! quantities are replaced by windowed finite-horizon estimates (see
//! [`rates`]). Natural logarithms are used throughout, so every rate is in
//! nats per iterate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod bitset;
pub mod cover;
pub mod dynamics;
mod error;
pub mod metric;
pub mod rates;
mod solver;
mod stats;
pub mod systems;

pub use bitset::BitSet;
pub use cover::{Cover, CoverViolation, LebesgueReport, SubcoverResult};
pub use dynamics::{DynMap, RateSequence};
pub use error::{Error, Result};
pub use metric::{DimEstimate, Extended, FiniteMetricSpace, Label, Metric, NeighborOrder, PointSet, SpaceViolation};
pub use rates::{InequalityReport, RateEstimate, Window};
pub use solver::{Budget, SolveMode};
pub use stats::least_squares_slope;
pub use systems::{Family, SystemBundle, SystemSpec};
