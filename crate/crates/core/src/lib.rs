//! Statistical process control for high-dimensional streams that lie near a
//! low-dimensional manifold.
//!
//! Phase I data are used to fit the manifold (or a linear embedding), Phase II
//! observations are turned into deviations or embedded coordinates, those are
//! prewhitened with an autoregressive filter, and a distribution-free rank
//! chart raises the alarm.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod embedding;
pub mod error;
mod index;
pub mod manifold_fit;
pub mod pipelines;
pub mod prewhiten;
pub mod processes;
pub mod rankcharts;

pub use cloud::PointCloud;
pub use error::{Error, Result};
