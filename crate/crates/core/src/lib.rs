//! Spatio-temporal specification mining over weighted location graphs.
//!
//! The crate monitors STREL formulas on sampled traces, projects each location
//! onto the parameter space of a monotone template, clusters the projections
//! and describes every cluster with a small formula read off a decision tree.

pub mod boxtree;
pub mod clustering;
pub mod pipeline;
pub mod pstrel;
pub mod spatial;
pub mod strel;
pub mod trace;
