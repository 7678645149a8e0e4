//! Sublinear-query estimation of bilinear forms `x^T A y` and almost-uniform
//! weighted sampling of matrix entries, over an oracle that answers inner
//! products of a matrix row or column with a query vector.
//!
//! The layers, bottom-up:
//!
//! - [`matrix`]: matrices, weight vectors, ranges, file formats and the exact
//!   full-traversal reference computations.
//! - [`oracle`]: the prefix-sum inner product oracle with per-session query
//!   accounting.
//! - [`regr`]: value-proportional sampling within a row in `O(log n)` queries.
//! - [`bfe`]: bucketing estimator of `1^T A 1` for symmetric `A`.
//! - [`sau`]: light/heavy rejection sampler emitting `A_ij` with probability
//!   close to `A_ij / 1^T A 1`.
//! - [`general`]: oracle simulations extending both to asymmetric `A` and
//!   arbitrary weight vectors.
//! - [`instances`]: random, planted and lower-bound instance generators.
//! - [`stats`]: distance and goodness-of-fit helpers for checking samplers.

pub mod bfe;
pub mod general;
pub mod instances;
pub mod matrix;
pub mod oracle;
pub mod params;
pub mod randomness;
pub mod regr;
pub mod sau;
pub mod stats;

pub use bfe::{bfe, bfe_with_lower_bound, BfeConfig, BfeError, Estimate};
pub use general::{bfe_general, sau_general, GeneralError, GeneralSampler, SimulatedOracle};
pub use matrix::{
    exact_bilinear, exact_row_sum, load_matrix, load_weights, BitRange, Matrix, MatrixError,
    WeightVector,
};
pub use oracle::{InnerProductOracle, OracleError, PrefixOracle, QueryCounter, SharedPrefix};
pub use params::Epsilon;
pub use randomness::{enumerate_law, RandomSource};
pub use regr::{regr, EntrySample, RegrError};
pub use sau::{sau, SauConfig, SauError, SauSampler, SauSettings};
