//! Cartan-connection curvature and recurrence classification for Finsler metrics.

// `!(a <= b)` is deliberate: NaN must land on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagram;
pub mod dsl;
pub mod fd;
pub mod geometry;
pub mod identities;
pub mod jet;
pub mod linalg;
pub mod metric;
pub mod recurrence;
pub mod report;
pub mod scalar;
pub mod tensor;
pub mod zoo;
