//! Concentration bounds for Gaussian quadratic forms and for the Frobenius
//! loss of the empirical covariance, plus a seeded Monte-Carlo engine that
//! checks them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covbounds;
pub mod error;
pub mod gauss_qf;
pub mod matstats;
pub mod mc;
pub mod quantiles;
pub mod roots;
pub mod verify;

pub use error::{Error, Result};
pub use matstats::{CovStats, QfStats, Spectrum};
