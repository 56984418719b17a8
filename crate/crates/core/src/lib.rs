//! Central-path laboratory for nonlinear semidefinite programs whose KKT
//! points violate the nondegeneracy condition.
//!
//! The crate traces primal-dual central paths of
//!
//! ```text
//!     minimize f(x)  subject to  G(x) ⪰ 0,  h(x) = 0
//! ```
//!
//! computes the analytic center of the Lagrange multiplier set and the
//! limiting direction of the path, and measures the asymptotic behavior of
//! traced paths against instances with closed-form answers.
//!
//! Everything here is pure computation on dense matrices, so the crate is
//! `no_std` (it needs `alloc`). File formats, serialization and the command
//! line live in the companion `cpath` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod barrier;
pub mod error;
pub mod kkt;
pub mod lab;
pub mod model;
pub mod num;
pub mod path;
pub mod rng;
pub mod symlin;

pub use error::{Error, Result};
pub use kkt::PrimalDualTriplet;
pub use model::{NsdpInstance, QmiData, QmiInstance};
pub use symlin::{Mat, SymMat};
