// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod closed_loop;
pub mod config;
pub mod error;
pub mod kernels;
pub mod model;
pub mod ode;
pub mod pipeline;
pub mod transport;

pub use error::{CraneError, Result};
