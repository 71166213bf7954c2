use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::graph::{Graph, Multiset};

/// Content-addressed d-pattern identifier.
///
/// The digest is the first 128 bits of SHA-256 over a canonical serialization
/// of the pattern's expansion, so identical patterns get identical ids in any
/// graph, on any thread, in any order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternId {
    depth: u32,
    digest: u128,
}

impl PatternId {
    pub fn depth(&self) -> usize {
        self.depth as usize
    }

    pub fn digest(&self) -> u128 {
        self.digest
    }

    pub fn hex(&self) -> String {
        format!("{:032x}", self.digest)
    }

    pub fn from_parts(depth: usize, digest: u128) -> Self {
        Self {
            depth: depth as u32,
            digest,
        }
    }

    pub fn for_feature(class: usize) -> Self {
        let mut h = Sha256::new();
        h.update(0u32.to_le_bytes());
        h.update((class as u64).to_le_bytes());
        Self {
            depth: 0,
            digest: truncate(h.finalize().as_slice()),
        }
    }

    pub fn for_refinement(parent: PatternId, neighbors: &Multiset<PatternId>) -> Self {
        let depth = parent.depth + 1;
        let mut h = Sha256::new();
        h.update(depth.to_le_bytes());
        h.update(parent.digest.to_le_bytes());
        h.update((neighbors.distinct() as u64).to_le_bytes());
        for (child, count) in neighbors.entries() {
            h.update(child.digest.to_le_bytes());
            h.update((*count as u64).to_le_bytes());
        }
        Self {
            depth,
            digest: truncate(h.finalize().as_slice()),
        }
    }
}

fn truncate(bytes: &[u8]) -> u128 {
    let mut head = [0u8; 16];
    head.copy_from_slice(&bytes[..16]);
    u128::from_be_bytes(head)
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}:{}", self.depth, self.hex())
    }
}

/// One step of the pattern recursion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expansion {
    Feature(usize),
    Refined {
        parent: PatternId,
        neighbors: Multiset<PatternId>,
    },
}

/// Memo of every expansion seen so far. Two different expansions landing on
/// one digest are recorded as collisions instead of being silently merged.
#[derive(Clone, Debug, Default)]
pub struct PatternTable {
    expansions: HashMap<PatternId, Expansion>,
    log: Vec<PatternId>,
    collisions: Vec<PatternId>,
}

impl PatternTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.expansions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansions.is_empty()
    }

    pub fn get(&self, id: &PatternId) -> Option<&Expansion> {
        self.expansions.get(id)
    }

    pub fn contains(&self, id: &PatternId) -> bool {
        self.expansions.contains_key(id)
    }

    /// Ids in first-insertion order.
    pub fn insertion_log(&self) -> &[PatternId] {
        &self.log
    }

    pub fn collisions(&self) -> &[PatternId] {
        &self.collisions
    }

    /// All known ids at the given depth, sorted.
    pub fn ids_at_depth(&self, depth: usize) -> Vec<PatternId> {
        let mut ids: Vec<_> = self
            .expansions
            .keys()
            .filter(|id| id.depth() == depth)
            .copied()
            .collect();
        ids.sort();
        ids
    }

    pub fn insert(&mut self, id: PatternId, expansion: Expansion) {
        match self.expansions.get(&id) {
            Some(existing) => {
                if *existing != expansion {
                    self.collisions.push(id);
                }
            }
            None => {
                self.expansions.insert(id, expansion);
                self.log.push(id);
            }
        }
    }

    pub fn merge(&mut self, other: &PatternTable) {
        for id in &other.log {
            self.insert(*id, other.expansions[id].clone());
        }
        self.collisions.extend_from_slice(&other.collisions);
    }

    /// The set of ids reachable from `roots` by expansion, including `roots`.
    pub fn closure(&self, roots: &[PatternId]) -> Vec<PatternId> {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack: Vec<PatternId> = roots.to_vec();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(Expansion::Refined { parent, neighbors }) = self.expansions.get(&id) {
                stack.push(*parent);
                stack.extend(neighbors.entries().iter().map(|(c, _)| *c));
            }
        }
        seen.into_iter().collect()
    }
}

/// Pattern ids of every node at every depth `0..=d`: `ids[t][v]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refinement {
    ids: Vec<Vec<PatternId>>,
}

impl Refinement {
    pub fn depth(&self) -> usize {
        self.ids.len() - 1
    }

    pub fn at_depth(&self, t: usize) -> &[PatternId] {
        &self.ids[t]
    }

    pub fn deepest(&self) -> &[PatternId] {
        self.ids.last().expect("refinement has depth 0 at least")
    }

    /// Node partition at depth `t`: class index per node, numbered in order of
    /// first appearance.
    pub fn partition(&self, t: usize) -> Vec<usize> {
        let mut index = HashMap::new();
        self.ids[t]
            .iter()
            .map(|id| {
                let next = index.len();
                *index.entry(*id).or_insert(next)
            })
            .collect()
    }
}

pub fn refine_patterns(g: &Graph, d: usize) -> (Refinement, PatternTable) {
    let mut table = PatternTable::new();
    let refinement = refine_patterns_into(g, d, &mut table);
    (refinement, table)
}

/// Colour refinement for `d` rounds, recording expansions in `table`.
pub fn refine_patterns_into(g: &Graph, d: usize, table: &mut PatternTable) -> Refinement {
    let n = g.num_nodes();
    let mut ids = Vec::with_capacity(d + 1);
    let level0: Vec<PatternId> = g
        .features()
        .iter()
        .map(|&c| {
            let id = PatternId::for_feature(c);
            table.insert(id, Expansion::Feature(c));
            id
        })
        .collect();
    ids.push(level0);
    for t in 1..=d {
        let prev = &ids[t - 1];
        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            let neighbors: Multiset<PatternId> = g.neighbors(v).iter().map(|&u| prev[u]).collect();
            let id = PatternId::for_refinement(prev[v], &neighbors);
            table.insert(
                id,
                Expansion::Refined {
                    parent: prev[v],
                    neighbors,
                },
            );
            next.push(id);
        }
        ids.push(next);
    }
    Refinement { ids }
}

/// Refines many graphs in parallel. Per-graph tables are merged in input
/// order, so the result does not depend on scheduling.
pub fn refine_many(graphs: &[Graph], d: usize) -> (Vec<Refinement>, PatternTable) {
    let parts: Vec<(Refinement, PatternTable)> =
        graphs.par_iter().map(|g| refine_patterns(g, d)).collect();
    let mut table = PatternTable::new();
    let mut out = Vec::with_capacity(parts.len());
    for (r, t) in parts {
        table.merge(&t);
        out.push(r);
    }
    (out, table)
}
