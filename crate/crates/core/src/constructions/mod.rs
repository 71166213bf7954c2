//! Hand-built networks: exact memorizers, models that are correct on one
//! pattern distribution and wrong on another, and the linear edge-count
//! analysis.

pub mod bad;
pub mod edge_count;
pub mod integer;
pub mod memorizer;

pub use bad::{build_bad_graph_gnn, build_bad_node_gnn, node_zero_one_loss};
pub use edge_count::{
    edge_count_gnn, edge_count_solution_space, gd_projection_check, min_norm_solution, EdgeCountParams, GdCheck,
    LinearEdgeCountProblem, Norm, SolutionSpace,
};
pub use integer::{build_integer_memorizer, extrapolate, IntegerMemorizer};
pub use memorizer::{build_pattern_memorizer, build_pattern_model, PatternMemorizer, PatternTargetSpec, UnseenPolicy};
