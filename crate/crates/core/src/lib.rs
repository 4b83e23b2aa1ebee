//! Augmented hierarchical quadratic programming for an ergonomics-aware
//! mobile manipulator.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod ergomap;
pub mod hqp;
pub mod kinematics;
pub mod linalg;
pub mod qp;
pub mod sim;
pub mod svm;
pub mod tasks;
