//! Entropy-regularized quantization of probability measures.
//!
//! A source measure `P` on `R^d` is approximated by a discrete measure
//! `sum_j p_j delta_{y_j}` minimizing the regularized transport objective
//!
//! ```text
//! E_P smin_lambda(d(xi, y_1)^r, ..., d(xi, y_m)^r; p)
//! ```
//!
//! where `smin_lambda` is the weighted smooth minimum. As `lambda` grows the
//! optimal quantizers merge and end at a single atom in the center of `P`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod measures;
pub mod objective;
pub mod oracle;
pub mod sgd;
pub mod softmin;

pub use error::{Error, Result};
pub use geometry::DistanceSpec;
pub use measures::{DiscreteMeasure, Point, SourceSpec};
pub use sgd::{LearningRate, QuantizerState, RunConfig, Trajectory};
pub use softmin::{Regularization, WeightedValues};
