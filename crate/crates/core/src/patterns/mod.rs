//! d-patterns: the information a d-layer message-passing network can see at
//! a node, computed by colour refinement with content-addressed identifiers.

mod histogram;
mod refine;
mod report;
mod tree;
mod worst_case;

pub use histogram::{pattern_histogram, tv_distance, PatternHistogram};
pub use refine::{
    refine_many, refine_patterns, refine_patterns_into, Expansion, PatternId, PatternTable,
    Refinement,
};
pub use report::{read_pattern_report, write_pattern_report, PatternReportRow};
pub use tree::{
    pattern_tree_descriptor, pattern_tree_descriptors, unrolled_tree, PatternTree, TreeDescriptor,
    TreeNode,
};
pub use worst_case::{worst_case_set, WorstCaseSet, EXACT_CANDIDATE_LIMIT};
