//! Undirected simple graphs with categorical node features.

mod generators;
mod multiset;

pub use generators::{gen_er, gen_geometric, gen_geometric_with_points, gen_pa};
pub use multiset::Multiset;

use crate::error::{Error, Result};

/// Undirected simple graph. Adjacency lists are sorted and symmetric, there
/// are no self-loops or parallel edges, and every feature is `< num_classes`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    features: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate edges, in either
    /// orientation, collapse to one.
    pub fn new(
        n: usize,
        edges: &[(usize, usize)],
        features: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: features.len(),
                context: "features per node",
            });
        }
        if num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be at least 1".into()));
        }
        for (node, &class) in features.iter().enumerate() {
            if class >= num_classes {
                return Err(Error::FeatureOutOfRange {
                    node,
                    class,
                    num_classes,
                });
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            for index in [u, v] {
                if index >= n {
                    return Err(Error::NodeOutOfRange {
                        index,
                        num_nodes: n,
                    });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            adjacency,
            features,
            num_classes,
        })
    }

    /// A graph whose nodes all carry feature class 0.
    pub fn uniform(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(n, edges, vec![0; n], 1)
    }

    /// Builds directly from sorted, deduplicated, symmetric adjacency lists.
    /// Only used by generators that already maintain those invariants.
    pub(crate) fn from_sorted_adjacency(
        adjacency: Vec<Vec<usize>>,
        features: Vec<usize>,
        num_classes: usize,
    ) -> Self {
        debug_assert!(adjacency.iter().all(|l| l.windows(2).all(|w| w[0] < w[1])));
        Self {
            adjacency,
            features,
            num_classes,
        }
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n)
            .map(|v| (0..n).filter(|&u| u != v).collect())
            .collect();
        Self::from_sorted_adjacency(adjacency, vec![0; n], 1)
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted_adjacency(vec![Vec::new(); n], vec![0; n], 1)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn feature(&self, v: usize) -> usize {
        self.features[v]
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.adjacency
            .get(v)
            .map(Vec::len)
            .ok_or(Error::NodeOutOfRange {
                index: v,
                num_nodes: self.num_nodes(),
            })
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` pairs with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (u, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Same graph with a different feature assignment.
    pub fn with_features(&self, features: Vec<usize>, num_classes: usize) -> Result<Self> {
        Self::new(self.num_nodes(), &self.edges(), features, num_classes)
    }

    /// Relabels nodes: node `v` of `self` becomes node `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: perm.len(),
                context: "permutation length",
            });
        }
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[p] = true;
        }
        let edges: Vec<_> = self.edges().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut features = vec![0; n];
        for v in 0..n {
            features[perm[v]] = self.features[v];
        }
        Self::new(n, &edges, features, self.num_classes)
    }

    /// Disjoint union; nodes of `other` are shifted by `self.num_nodes()`.
    pub fn disjoint_union(&self, other: &Graph) -> Result<Self> {
        let shift = self.num_nodes();
        let mut edges = self.edges();
        edges.extend(other.edges().iter().map(|&(u, v)| (u + shift, v + shift)));
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        Self::new(
            shift + other.num_nodes(),
            &edges,
            features,
            self.num_classes.max(other.num_classes),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The 4-node, 3-colour example graph: black 0, yellow 1 and 2, grey 3.
    fn colored_example() -> Graph {
        Graph::new(4, &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)], vec![0, 1, 1, 2], 3).unwrap()
    }

    #[test]
    fn single_edge_degrees() {
        let g = Graph::uniform(2, &[(0, 1)]).unwrap();
        assert_eq!(g.degree(0).unwrap(), 1);
        assert_eq!(g.degree(1).unwrap(), 1);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = Graph::uniform(3, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn example_adjacency_is_symmetric() {
        let g = colored_example();
        for v in 0..4 {
            for u in 0..4 {
                assert_eq!(g.neighbors(v).contains(&u), g.neighbors(u).contains(&v));
            }
        }
        // black node sees its two drawn neighbours
        assert_eq!(g.degree(0).unwrap(), 2);
        assert_eq!(g.degrees(), vec![2, 3, 3, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Graph::uniform(2, &[(0, 2)]),
            Err(Error::NodeOutOfRange { index: 2, .. })
        ));
        assert!(matches!(Graph::uniform(2, &[(1, 1)]), Err(Error::SelfLoop(1))));
        assert!(matches!(
            Graph::new(2, &[], vec![0, 3], 2),
            Err(Error::FeatureOutOfRange { node: 1, .. })
        ));
        assert!(Graph::uniform(2, &[]).unwrap().degree(2).is_err());
    }

    #[test]
    fn complete_and_empty() {
        let k4 = Graph::complete(4);
        assert!((0..4).all(|v| k4.degree(v).unwrap() == 3));
        assert_eq!(k4.num_edges(), 6);
        let e = Graph::empty(5);
        assert!((0..5).all(|v| e.degree(v).unwrap() == 0));
    }

    #[test]
    fn permutation_preserves_degrees() {
        let g = colored_example();
        let h = g.permuted(&[3, 0, 2, 1]).unwrap();
        assert_eq!(h.degree(3).unwrap(), 2);
        assert_eq!(h.feature(3), 0);
        assert_eq!(h.num_edges(), g.num_edges());
    }
}
