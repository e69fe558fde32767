//! Joint precoding and quantization-covariance design for the downlink of a
//! cloud radio access network whose base stations are fed by finite-capacity
//! backhaul links.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: network dimensions, channel generators and block selectors.
//! - [`rates`]: closed-form user rates, dirty-paper rates, multivariate
//!   backhaul rates, feasibility checks and contrapolymatroid corner points.
//! - [`optimizer`]: the majorize-minimize solver for weighted sum-rate
//!   maximization and its variants (independent quantization, separate
//!   design, full cooperation, dirty-paper coding, robust designs).
//! - [`sim`]: the successive estimation-compression pipeline and its Monte
//!   Carlo validator.
//!
//! All rates are in bits per channel use; powers are linear.

pub mod error;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod rates;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
