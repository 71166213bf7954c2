use std::collections::{BTreeMap, BTreeSet};

use super::refine::{refine_many, PatternId};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Empirical (or explicit) distribution over depth-`d` patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternHistogram {
    depth: usize,
    mass: BTreeMap<PatternId, f64>,
    counts: Option<BTreeMap<PatternId, u64>>,
    node_count: usize,
}

impl PatternHistogram {
    /// Histogram from node counts per pattern.
    pub fn from_counts(depth: usize, counts: BTreeMap<PatternId, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::EmptyInput("pattern counts"));
        }
        check_depth(depth, counts.keys())?;
        let mass = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(id, &c)| (*id, c as f64 / total as f64))
            .collect();
        Ok(Self {
            depth,
            mass,
            counts: Some(counts.into_iter().filter(|(_, c)| *c > 0).collect()),
            node_count: total as usize,
        })
    }

    /// Histogram from explicit probabilities (must sum to 1 within 1e-12).
    pub fn from_masses(depth: usize, masses: impl IntoIterator<Item = (PatternId, f64)>) -> Result<Self> {
        let mut mass = BTreeMap::new();
        for (id, m) in masses {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::InvalidArgument(format!("mass {m} for {id}")));
            }
            if m > 0.0 {
                *mass.entry(id).or_insert(0.0) += m;
            }
        }
        check_depth(depth, mass.keys())?;
        let total: f64 = mass.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("masses sum to {total}, not 1")));
        }
        Ok(Self {
            depth,
            mass,
            counts: None,
            node_count: 0,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of nodes behind an empirical histogram (0 for explicit ones).
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn mass(&self, id: &PatternId) -> f64 {
        self.mass.get(id).copied().unwrap_or(0.0)
    }

    pub fn masses(&self) -> &BTreeMap<PatternId, f64> {
        &self.mass
    }

    pub fn count(&self, id: &PatternId) -> Option<u64> {
        self.counts.as_ref().map(|c| c.get(id).copied().unwrap_or(0))
    }

    pub fn support(&self) -> impl Iterator<Item = &PatternId> {
        self.mass.keys()
    }

    pub fn support_set(&self) -> BTreeSet<PatternId> {
        self.mass.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Total mass of a pattern set. For empirical histograms this is the
    /// node count of the set divided by the node total, in one division.
    pub fn mass_of<'a>(&self, set: impl IntoIterator<Item = &'a PatternId>) -> f64 {
        match &self.counts {
            Some(counts) => {
                let c: u64 = set.into_iter().map(|id| counts.get(id).copied().unwrap_or(0)).sum();
                c as f64 / self.node_count as f64
            }
            None => set.into_iter().map(|id| self.mass(id)).sum(),
        }
    }
}

fn check_depth<'a>(depth: usize, ids: impl Iterator<Item = &'a PatternId>) -> Result<()> {
    for id in ids {
        if id.depth() != depth {
            return Err(Error::DepthMismatch(depth, id.depth()));
        }
    }
    Ok(())
}

/// Empirical distribution of depth-`d` pattern ids over all nodes of all graphs.
pub fn pattern_histogram(graphs: &[Graph], d: usize) -> Result<PatternHistogram> {
    let first = graphs.first().ok_or(Error::EmptyInput("graph list"))?;
    if let Some(g) = graphs.iter().find(|g| g.num_classes() != first.num_classes()) {
        return Err(Error::InvalidArgument(format!(
            "graphs disagree on num_classes ({} vs {})",
            first.num_classes(),
            g.num_classes()
        )));
    }
    let (refinements, _) = refine_many(graphs, d);
    let mut counts: BTreeMap<PatternId, u64> = BTreeMap::new();
    for r in &refinements {
        for id in r.deepest() {
            *counts.entry(*id).or_insert(0) += 1;
        }
    }
    PatternHistogram::from_counts(d, counts)
}

/// Total-variation distance `½ Σ |h1(p) − h2(p)|` over the union support.
pub fn tv_distance(h1: &PatternHistogram, h2: &PatternHistogram) -> Result<f64> {
    if h1.depth != h2.depth {
        return Err(Error::DepthMismatch(h1.depth, h2.depth));
    }
    let mut sum = 0.0;
    let mut a = h1.mass.iter().peekable();
    let mut b = h2.mass.iter().peekable();
    loop {
        match (a.peek(), b.peek()) {
            (Some((ka, va)), Some((kb, vb))) => match ka.cmp(kb) {
                std::cmp::Ordering::Less => {
                    sum += **va;
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    sum += **vb;
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += (**va - **vb).abs();
                    a.next();
                    b.next();
                }
            },
            (Some((_, va)), None) => {
                sum += **va;
                a.next();
            }
            (None, Some((_, vb))) => {
                sum += **vb;
                b.next();
            }
            (None, None) => break,
        }
    }
    Ok((0.5 * sum).clamp(0.0, 1.0))
}
