//! Cellular downlink simulator for ground users and UAV corridors, with
//! Bayesian optimizers for per-cell antenna tilts and vertical beamwidths.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// per-cell loops index several parallel arrays at once
#![allow(clippy::needless_range_loop)]

pub mod bo;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod linalg;
pub mod morbo;
pub mod netsim;
pub mod rng;
pub mod scenario;
pub mod transfer;
pub mod turbo;

pub use error::{Error, Result};
