//! Adaptive-gain smooth sliding-mode control of the elevation and pitch
//! axes of a 3-DOF helicopter.
//!
//! The crate provides the plant model, the sliding surfaces and adaptive
//! controllers, disturbance observers, a closed-loop run engine with
//! record output, and a stability certificate calculator for the gain
//! constraints.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod controllers;
pub mod error;
pub mod experiments;
pub mod gains;
pub mod numerics;
pub mod observer;
pub mod plant;
pub mod scenario;
pub mod surfaces;

pub use error::{Error, Result};
