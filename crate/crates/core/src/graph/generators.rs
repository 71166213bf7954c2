//! Seeded random-graph models. All generators emit uniform features (class 0).

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Erdős–Rényi `G(n, p)`: each unordered pair is an edge independently with
/// probability `p`.
pub fn gen_er(n: usize, p: f64, rng: &mut RngStream) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
    }
    let mut adjacency = vec![Vec::new(); n];
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.next_f64() < p {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
    }
    // u ascends in the outer loop, so each list is already sorted.
    Ok(Graph::from_sorted_adjacency(adjacency, vec![0; n], 1))
}

/// Barabási–Albert preferential attachment. The seed is an `(m+1)`-clique;
/// each later node attaches to `m` distinct existing nodes chosen with
/// probability proportional to degree (collisions are re-drawn).
pub fn gen_pa(n: usize, m: usize, rng: &mut RngStream) -> Result<Graph> {
    if m == 0 || n <= m {
        return Err(Error::InvalidArgument(format!(
            "preferential attachment needs n > m >= 1 (n={n}, m={m})"
        )));
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    // Every edge endpoint appears once here, so a uniform pick from this list
    // is a degree-proportional pick of a node.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m * (m + 1) / 2 + (n - m - 1) * m));
    for u in 0..=m {
        for v in (u + 1)..=m {
            adjacency[u].push(v);
            adjacency[v].push(u);
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for new in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let candidate = endpoints[rng.below(endpoints.len())];
            if !targets.contains(&candidate) {
                targets.push(candidate);
            }
        }
        for &t in &targets {
            adjacency[new].push(t);
            adjacency[t].push(new);
            endpoints.push(new);
            endpoints.push(t);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(Graph::from_sorted_adjacency(adjacency, vec![0; n], 1))
}

/// Random geometric graph on the unit square together with the sampled
/// points. Nodes are joined iff their Euclidean distance is `< rho`.
pub fn gen_geometric_with_points(
    n: usize,
    rho: f64,
    rng: &mut RngStream,
) -> Result<(Graph, Vec<[f64; 2]>)> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {rho} must be positive")));
    }
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.next_f64(), rng.next_f64()]).collect();
    let rho2 = rho * rho;
    let mut adjacency = vec![Vec::new(); n];
    for u in 0..n {
        for v in (u + 1)..n {
            let dx = points[u][0] - points[v][0];
            let dy = points[u][1] - points[v][1];
            if dx * dx + dy * dy < rho2 {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
    }
    Ok((Graph::from_sorted_adjacency(adjacency, vec![0; n], 1), points))
}

pub fn gen_geometric(n: usize, rho: f64, rng: &mut RngStream) -> Result<Graph> {
    gen_geometric_with_points(n, rho, rng).map(|(g, _)| g)
}
