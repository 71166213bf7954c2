//! The worst-case pattern set: the most test mass reachable by a pattern set
//! whose train mass stays strictly below a budget.

use std::collections::BTreeSet;

use super::histogram::PatternHistogram;
use super::refine::PatternId;
use crate::error::{Error, Result};

/// Above this many positive-cost candidates the search falls back to a greedy
/// ratio heuristic (2^20 subsets).
pub const EXACT_CANDIDATE_LIMIT: usize = 20;

/// Train masses are rationalised on this grid for the knapsack.
const GRID: f64 = 1e-6;
/// Strict `P_train(A) < eps` is evaluated as `P_train(A) <= eps - SLACK`.
const SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct WorstCaseSet {
    pub patterns: BTreeSet<PatternId>,
    pub train_mass: f64,
    /// Test mass of `patterns`.
    pub delta: f64,
    /// False when the greedy fallback was used.
    pub exact: bool,
}

pub fn worst_case_set(
    h_train: &PatternHistogram,
    h_test: &PatternHistogram,
    eps: f64,
) -> Result<WorstCaseSet> {
    if h_train.depth() != h_test.depth() {
        return Err(Error::DepthMismatch(h_train.depth(), h_test.depth()));
    }
    if !(eps > 0.0) || eps > 1.0 {
        return Err(Error::InvalidArgument(format!("eps {eps} outside (0, 1]")));
    }
    let budget = eps - SLACK;

    // Unseen-in-train patterns cost nothing and are always taken.
    let mut chosen: BTreeSet<PatternId> = BTreeSet::new();
    let mut candidates: Vec<(PatternId, f64, f64)> = Vec::new();
    for (id, &test_mass) in h_test.masses() {
        let cost = h_train.mass(id);
        if cost == 0.0 {
            chosen.insert(*id);
        } else {
            candidates.push((*id, cost, test_mass));
        }
    }

    let exact = candidates.len() <= EXACT_CANDIDATE_LIMIT;
    let picked = if exact {
        knapsack(&candidates, budget)
    } else {
        greedy(&candidates, budget)
    };
    chosen.extend(picked.into_iter().map(|i| candidates[i].0));

    Ok(WorstCaseSet {
        train_mass: h_train.mass_of(chosen.iter()),
        delta: h_test.mass_of(chosen.iter()),
        patterns: chosen,
        exact,
    })
}

/// 0/1 knapsack over grid-rounded costs; returns chosen candidate indices.
fn knapsack(items: &[(PatternId, f64, f64)], budget: f64) -> Vec<usize> {
    if budget < 0.0 || items.is_empty() {
        return Vec::new();
    }
    let capacity = (budget / GRID).floor() as usize;
    // Costs are rounded up (less a hair for exact grid values) so that every
    // grid-feasible set is feasible in real arithmetic too.
    let weights: Vec<usize> = items
        .iter()
        .map(|(_, cost, _)| ((cost / GRID) - 1e-6).ceil().max(0.0) as usize)
        .collect();
    let width = capacity + 1;
    let mut best = vec![0.0f64; width];
    let mut take = vec![false; items.len() * width];
    for (i, (_, _, value)) in items.iter().enumerate() {
        let w = weights[i];
        if w > capacity {
            continue;
        }
        for c in (w..=capacity).rev() {
            let candidate = best[c - w] + value;
            if candidate > best[c] {
                best[c] = candidate;
                take[i * width + c] = true;
            }
        }
    }
    let mut c = capacity;
    let mut picked = Vec::new();
    for i in (0..items.len()).rev() {
        if take[i * width + c] {
            picked.push(i);
            c -= weights[i];
        }
    }
    picked
}

fn greedy(items: &[(PatternId, f64, f64)], budget: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = items[a].2 / items[a].1;
        let rb = items[b].2 / items[b].1;
        rb.total_cmp(&ra).then(items[a].0.cmp(&items[b].0))
    });
    let mut spent = 0.0;
    let mut picked = Vec::new();
    for i in order {
        if spent + items[i].1 <= budget {
            spent += items[i].1;
            picked.push(i);
        }
    }
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(k: u128) -> PatternId {
        PatternId::from_parts(1, k)
    }

    fn hist(masses: &[(u128, f64)]) -> PatternHistogram {
        PatternHistogram::from_masses(1, masses.iter().map(|&(k, m)| (id(k), m))).unwrap()
    }

    #[test]
    fn disjoint_supports_give_full_delta() {
        let a = hist(&[(1, 0.5), (2, 0.5)]);
        let b = hist(&[(3, 0.7), (4, 0.3)]);
        let w = worst_case_set(&a, &b, 0.01).unwrap();
        assert!((w.delta - 1.0).abs() < 1e-12);
        assert_eq!(w.train_mass, 0.0);
    }

    #[test]
    fn toy_four_patterns() {
        let train = hist(&[(1, 0.4), (2, 0.4), (3, 0.1), (4, 0.1)]);
        let test = hist(&[(1, 0.1), (2, 0.1), (3, 0.4), (4, 0.4)]);
        let w = worst_case_set(&train, &test, 0.25).unwrap();
        assert_eq!(w.patterns, [id(3), id(4)].into_iter().collect());
        assert!((w.delta - 0.8).abs() < 1e-12);
        assert!(w.exact);
    }

    #[test]
    fn identical_histograms_respect_budget() {
        let h = hist(&[(1, 0.05), (2, 0.15), (3, 0.3), (4, 0.5)]);
        let w = worst_case_set(&h, &h, 0.1).unwrap();
        assert!(w.delta < 0.1 + 0.5);
        assert!(w.train_mass < 0.1);
    }

    #[test]
    fn strict_budget_boundary() {
        // A set of train mass exactly eps is not admissible.
        let train = hist(&[(1, 0.25), (2, 0.75)]);
        let test = hist(&[(1, 1.0)]);
        let w = worst_case_set(&train, &test, 0.25).unwrap();
        assert!(w.patterns.is_empty());
        assert_eq!(w.delta, 0.0);
    }

    #[test]
    fn invalid_eps() {
        let h = hist(&[(1, 1.0)]);
        assert!(worst_case_set(&h, &h, 0.0).is_err());
        assert!(worst_case_set(&h, &h, -1.0).is_err());
    }
}
