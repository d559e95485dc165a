//! Homotopy conditional-gradient methods for convex programs over compact
//! sets intersected with cones described by self-concordant barriers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod lanczos;
pub mod linalg;
pub mod lmo;
pub mod solver;
pub mod homotopy;
pub mod instances;
