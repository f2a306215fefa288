//! Dynamics of a massless particle around a straight segment with linearly
//! varying density.
//!
//! The crate works in the dimensionless chart fixed by [`units`]: the segment
//! lies on `xi in [-1 - A, 1 - A]` and `A in [0, 1/3)` is the only parameter.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circular;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod io;
pub mod par;
pub mod poincare;
pub mod potential;
pub mod quadrature;
pub mod reconstruction;
pub mod units;

pub use error::{Error, Result};
pub use integrator::Tolerances;
pub use par::Parallelism;
pub use units::{LengthUnit, ScaledParams, SegmentParams};
