//! Stochastic fluid and passive-scalar solvers on the periodic box, with the
//! spectral diagnostics used to study the Batchelor regime.

pub mod diagnostics;
pub mod fluid;
pub mod forcing;
pub mod lagrangian;
pub mod scalar;
pub mod spectral;
pub mod stats;
pub mod toy;
