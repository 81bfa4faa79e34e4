//! Exact-rational segments and partitions: regularity predicates, refinements, the
//! subpartition bound, the weak-regularity counterexample and the doubling decomposition.

mod counterexample;
mod exact;
mod refine;
mod segment;

pub use counterexample::{bisect_all, counterexample_partition, tau1_ratio, Counterexample};
pub use exact::Exact;
pub use refine::{
    joint_lambda_refinement, lambda_beta_exhaustive, subpartition_bound, weak_regularity_ratio, LambdaBetaReport,
};
pub use segment::{doubling_decomposition, make_dyadic, regularity, union_length, Partition, Segment};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("segment needs 0 <= m < M, got [{m}, {big_m}]")]
    InvalidSegment { m: String, big_m: String },
    #[error("partition pieces must be contiguous and nonempty")]
    NotContiguous,
    #[error("partitions cover different segments")]
    DifferentSegments,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no feasible N below the search cap {cap}")]
    NoFeasibleN { cap: usize },
    #[error("cannot parse rational {0:?}")]
    Parse(String),
}
