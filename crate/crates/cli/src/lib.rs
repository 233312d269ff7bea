//! Command-line front end for shrimp-core: imputation of CSV files, the
//! Monte Carlo study, pooling of estimate tables, and a sampler self-test.
pub mod commands;
pub mod config;
pub mod pool_table;
