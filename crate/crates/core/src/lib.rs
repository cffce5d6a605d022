//! Numerical core for exterior extension problems of second-order
//! strongly elliptic operators: fundamental-solution kernels, layer
//! potentials over closed boundaries, regularized dense collocation
//! solves, and the extension-problem solvers built on top of them.

pub mod geometry;
pub mod kernels;
pub mod manufactured;
pub mod potentials;
pub mod problems;
pub mod reglinalg;
