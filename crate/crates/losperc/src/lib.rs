//! Line-of-sight percolation on Cox–Delaunay street systems, with a
//! one-dimensional coverage engine and experiment drivers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coverage1d;
pub mod delaunay;
pub mod estimate;
pub mod experiments;
pub mod geometry;
pub mod model;
pub mod percolation;
pub mod rng;
