//! Unrolled pattern trees and their per-layer class-count descriptors.

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub depth: usize,
    /// Node of the original graph this tree node stands for.
    pub origin: usize,
    pub class: usize,
    pub parent: Option<usize>,
}

/// Depth-`d` unrolled tree. Children of a tree node are all original-graph
/// neighbours of its origin, including the origin of its own parent.
#[derive(Clone, Debug)]
pub struct PatternTree {
    nodes: Vec<TreeNode>,
    layer_starts: Vec<usize>,
}

impl PatternTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        self.layer_starts.len() - 1
    }

    pub fn layer(&self, depth: usize) -> &[TreeNode] {
        let start = self.layer_starts[depth];
        let end = self
            .layer_starts
            .get(depth + 1)
            .copied()
            .unwrap_or(self.nodes.len());
        &self.nodes[start..end]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        (0..=self.depth()).map(|l| self.layer(l).len()).collect()
    }

    /// Descriptor by direct counting of the tree's layers.
    pub fn descriptor(&self, num_classes: usize) -> TreeDescriptor {
        let mut counts = vec![vec![0u64; num_classes]; self.depth() + 1];
        for node in &self.nodes {
            counts[node.depth][node.class] += 1;
        }
        TreeDescriptor { counts }
    }
}

pub fn unrolled_tree(g: &Graph, v: usize, d: usize) -> Result<PatternTree> {
    check_node(g, v)?;
    let mut nodes = vec![TreeNode {
        depth: 0,
        origin: v,
        class: g.feature(v),
        parent: None,
    }];
    let mut layer_starts = vec![0];
    for depth in 1..=d {
        let prev_start = layer_starts[depth - 1];
        let prev_end = nodes.len();
        layer_starts.push(prev_end);
        for parent in prev_start..prev_end {
            let origin = nodes[parent].origin;
            for &u in g.neighbors(origin) {
                nodes.push(TreeNode {
                    depth,
                    origin: u,
                    class: g.feature(u),
                    parent: Some(parent),
                });
            }
        }
    }
    Ok(PatternTree {
        nodes,
        layer_starts,
    })
}

/// `counts[l][c]`: number of class-`c` nodes in layer `l` of the unrolled tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDescriptor {
    counts: Vec<Vec<u64>>,
}

impl TreeDescriptor {
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn depth(&self) -> usize {
        self.counts.len() - 1
    }

    /// Row-major flattening: layer 0 classes, then layer 1, and so on.
    pub fn flatten(&self) -> Vec<f64> {
        self.counts.iter().flatten().map(|&c| c as f64).collect()
    }
}

fn check_node(g: &Graph, v: usize) -> Result<()> {
    if v >= g.num_nodes() {
        return Err(Error::NodeOutOfRange {
            index: v,
            num_nodes: g.num_nodes(),
        });
    }
    Ok(())
}

/// Descriptor of one node via walk counts: layer-`l` tree nodes are the
/// length-`l` walks from the root, so `counts[l][c] = (A^l 1_c)_v`.
pub fn pattern_tree_descriptor(g: &Graph, v: usize, d: usize) -> Result<TreeDescriptor> {
    check_node(g, v)?;
    let c = g.num_classes();
    // walks[u] = number of length-l walks from v ending at u
    let mut walks = vec![0u64; g.num_nodes()];
    walks[v] = 1;
    let mut counts = Vec::with_capacity(d + 1);
    for l in 0..=d {
        if l > 0 {
            let mut next = vec![0u64; g.num_nodes()];
            for (u, &w) in walks.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                for &x in g.neighbors(u) {
                    next[x] = next[x].saturating_add(w);
                }
            }
            walks = next;
        }
        let mut row = vec![0u64; c];
        for (u, &w) in walks.iter().enumerate() {
            row[g.feature(u)] = row[g.feature(u)].saturating_add(w);
        }
        counts.push(row);
    }
    Ok(TreeDescriptor { counts })
}

/// Descriptors of every node at once, propagating class indicators:
/// `x_{l+1} = A x_l` with `x_0 = 1_c`.
pub fn pattern_tree_descriptors(g: &Graph, d: usize) -> Vec<TreeDescriptor> {
    let n = g.num_nodes();
    let classes = g.num_classes();
    let mut out = vec![
        TreeDescriptor {
            counts: vec![vec![0u64; classes]; d + 1],
        };
        n
    ];
    for c in 0..classes {
        let mut x: Vec<u64> = g.features().iter().map(|&f| u64::from(f == c)).collect();
        for l in 0..=d {
            if l > 0 {
                x = (0..n)
                    .map(|v| {
                        g.neighbors(v)
                            .iter()
                            .fold(0u64, |acc, &u| acc.saturating_add(x[u]))
                    })
                    .collect();
            }
            for v in 0..n {
                out[v].counts[l][c] = x[v];
            }
        }
    }
    out
}
