//! Control sets, chain control sets and Poincaré-sphere projections for
//! linear control systems `ẋ = Ax + Bu` with a compact convex control range.
//!
//! The closed-form pipeline lives in [`spectral`], [`convex`], [`reachsets`]
//! and [`poincare`]. [`chainlab`] is an independent brute-force oracle that
//! discretizes the state space and builds the controlled `(ε,T)`-chain graph,
//! so the closed forms can be checked against something that never looks at
//! them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chainlab;
pub mod control;
pub mod convex;
mod error;
pub mod linalg;
pub mod ode;
pub mod poincare;
pub mod quadrature;
pub mod reachsets;
mod schur;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
pub use system::{ControlRange, LinearSystem};
