//! Error type shared by every module in the crate.

use thiserror::Error;

/// Unified error for lattice, kernel, estimator, test, and generator
/// operations.
///
/// The CLI maps these onto exit codes: parameter and dimension errors are
/// usage errors, `Data` covers malformed or degenerate input, and
/// `ResourceGuard` is raised before an evaluation whose cost would blow
/// past a hard arithmetic budget.
#[derive(Debug, Error)]
pub enum Error {
    /// Number of variables outside the supported range for the operation.
    #[error("dimension d = {d} outside supported range {min}..={max} for {what}")]
    DimensionOutOfRange {
        what: &'static str,
        d: usize,
        min: usize,
        max: usize,
    },

    /// Two partitions (or a partition and a gram set) disagree on d.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// Malformed partition: bad notation, blocks that do not cover the
    /// ground set, duplicate indices, or an empty block.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Lattice element list contains duplicates.
    #[error("duplicate lattice elements")]
    DuplicateElements,

    /// Operation is well-formed but not defined for this combination.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// Scalar parameter out of range (bandwidth, alpha, permutation count,
    /// covariance strength, ...). The message names the violated bound.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input data is unusable: non-finite values, too few samples, unequal
    /// sample counts, unknown variable names, malformed CSV.
    #[error("data error: {0}")]
    Data(String),

    /// Evaluation refused because its cost exceeds a hard guard.
    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),
}
