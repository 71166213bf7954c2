#![allow(dead_code)]

use std::collections::HashMap;

use patternlab::graph::{gen_er, gen_geometric, gen_pa, Graph};
use patternlab::rng::RngStream;

/// Canonical string of node `v`'s depth-`d` pattern by direct recursion:
/// a 0-pattern is the feature, a d-pattern is the node's own (d−1)-pattern
/// plus the sorted multiset of its neighbours' (d−1)-patterns.
pub fn brute_pattern(g: &Graph, v: usize, d: usize) -> String {
    if d == 0 {
        return format!("c{}", g.feature(v));
    }
    let mut nb: Vec<String> = g.neighbors(v).iter().map(|&u| brute_pattern(g, u, d - 1)).collect();
    nb.sort();
    format!("({};[{}])", brute_pattern(g, v, d - 1), nb.join(","))
}

/// Memoised variant for bigger sweeps: patterns by depth.
pub fn brute_patterns(g: &Graph, d: usize) -> Vec<Vec<String>> {
    let n = g.num_nodes();
    let mut layers = vec![(0..n).map(|v| format!("c{}", g.feature(v))).collect::<Vec<_>>()];
    for t in 1..=d {
        let prev = &layers[t - 1];
        let next = (0..n)
            .map(|v| {
                let mut nb: Vec<&str> = g.neighbors(v).iter().map(|&u| prev[u].as_str()).collect();
                nb.sort();
                format!("({};[{}])", prev[v], nb.join(","))
            })
            .collect();
        layers.push(next);
    }
    layers
}

/// Every labelled graph on `n` nodes with uniform features.
pub fn all_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    (0..1u64 << pairs.len())
        .map(|mask| {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, e)| *e)
                .collect();
            Graph::uniform(n, &edges).unwrap()
        })
        .collect()
}

/// Two-way consistency of a pattern-id to canonical-string relation.
#[derive(Default)]
pub struct Bijection<K, V> {
    forward: HashMap<K, V>,
    backward: HashMap<V, K>,
    pub mismatches: usize,
    pub checked: usize,
}

impl<K: std::hash::Hash + Eq + Clone, V: std::hash::Hash + Eq + Clone> Bijection<K, V> {
    pub fn new() -> Self {
        Self {
            forward: HashMap::new(),
            backward: HashMap::new(),
            mismatches: 0,
            checked: 0,
        }
    }

    pub fn observe(&mut self, k: K, v: V) {
        self.checked += 1;
        let f = self.forward.entry(k.clone()).or_insert_with(|| v.clone());
        let b = self.backward.entry(v.clone()).or_insert_with(|| k.clone());
        if *f != v || *b != k {
            self.mismatches += 1;
        }
    }

    pub fn classes(&self) -> usize {
        self.forward.len()
    }
}

/// A random graph from one of the three generator families.
pub fn random_graph(family: usize, n: usize, rng: &mut RngStream) -> Graph {
    match family % 3 {
        0 => gen_er(n, 0.05 + 0.4 * rng.next_f64(), rng).unwrap(),
        1 => gen_pa(n.max(4), 1 + rng.below(3), rng).unwrap(),
        _ => gen_geometric(n, 0.15 + 0.3 * rng.next_f64(), rng).unwrap(),
    }
}

/// Recolours nodes uniformly from `classes` classes.
pub fn recolour(g: &Graph, classes: usize, rng: &mut RngStream) -> Graph {
    let features = (0..g.num_nodes()).map(|_| rng.below(classes)).collect();
    g.with_features(features, classes).unwrap()
}
