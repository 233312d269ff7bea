//! Multiple imputation of clustered data with spike-and-slab variable
//! selection.

// NaN must fail the positivity checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod dataset;
pub mod distributions;
pub mod error;
pub mod geweke;
pub mod lme;
pub mod logit;
pub mod pooling;
pub mod rng;
pub mod shrimp;
pub mod sim_study;
pub mod spike_slab;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
