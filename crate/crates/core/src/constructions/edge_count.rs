//! Single-layer linear GNN on uniform features predicting the edge count.
//!
//! On a graph with `n` nodes and `m` edges the model outputs
//! `n·w1 + 2m·w2 + n·b` (neighbour weight `w2`, self weight `w1`), so the
//! per-graph squared loss is `(n w1 + 2m w2 + n b − m)²`. Writing `s = w1 + b`
//! every constraint reads `n s + 2m w2 = m`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{GnnModel, Head, MessageLayer, Readout, MAIN_HEAD};
use crate::neural::{Activation, DenseLayer, DenseParams, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCountParams {
    pub w1: f64,
    pub w2: f64,
    pub b: f64,
}

impl EdgeCountParams {
    pub const GENERALIZING: EdgeCountParams = EdgeCountParams { w1: 0.0, w2: 0.5, b: 0.0 };

    pub fn new(w1: f64, w2: f64, b: f64) -> Self {
        Self { w1, w2, b }
    }

    fn as_array(self) -> [f64; 3] {
        [self.w1, self.w2, self.b]
    }

    fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    pub fn distance(self, other: EdgeCountParams) -> f64 {
        let (a, b) = (self.as_array(), other.as_array());
        a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    /// `w1 + b = 0` and `w2 = 1/2`: exact edge counts on every graph.
    pub fn is_generalizing(self, tol: f64) -> bool {
        (self.w1 + self.b).abs() <= tol && (self.w2 - 0.5).abs() <= tol
    }

    /// The equivalent one-layer GNN on `num_classes` one-hot features.
    pub fn to_gnn(self, num_classes: usize) -> GnnModel {
        let c = num_classes.max(1);
        let layer = MessageLayer::new(
            Matrix::from_vec(1, c, vec![self.w2; c]).expect("1 × c"),
            Matrix::from_vec(1, c, vec![self.w1; c]).expect("1 × c"),
            vec![self.b],
            Activation::Identity,
        )
        .expect("shapes agree");
        let mut heads = BTreeMap::new();
        heads.insert(
            MAIN_HEAD.to_string(),
            Head {
                readout: Readout::Sum,
                mlp: DenseParams::identity(1),
            },
        );
        GnnModel::new(c, vec![layer], DenseParams::identity(1), heads).expect("dims chain")
    }
}

/// Training pairs `(n_i, m_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearEdgeCountProblem {
    pub pairs: Vec<(u64, u64)>,
}

impl LinearEdgeCountProblem {
    pub fn new(pairs: Vec<(u64, u64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("edge-count pairs"));
        }
        if pairs.iter().any(|&(n, _)| n == 0) {
            return Err(Error::InvalidArgument("node counts must be >= 1".into()));
        }
        Ok(Self { pairs })
    }

    fn row(n: u64, m: u64) -> ([f64; 3], f64) {
        let (n, m) = (n as f64, m as f64);
        ([n, 2.0 * m, n], m)
    }

    /// Mean squared loss over the pairs.
    pub fn loss(&self, p: EdgeCountParams) -> f64 {
        self.pairs
            .iter()
            .map(|&(n, m)| {
                let (a, c) = Self::row(n, m);
                let r = dot3(a, p.as_array()) - c;
                r * r
            })
            .sum::<f64>()
            / self.pairs.len() as f64
    }

    pub fn gradient(&self, p: EdgeCountParams) -> [f64; 3] {
        let mut g = [0.0; 3];
        let k = self.pairs.len() as f64;
        for &(n, m) in &self.pairs {
            let (a, c) = Self::row(n, m);
            let r = dot3(a, p.as_array()) - c;
            for i in 0..3 {
                g[i] += 2.0 * r * a[i] / k;
            }
        }
        g
    }
}

/// Zero-loss set `{x : A x = c}` over `(w1, w2, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionSpace {
    /// Independent constraint rows with right-hand sides.
    pub constraints: Vec<([f64; 3], f64)>,
    /// All pairs share one `n/m` ratio, so a single constraint remains and the
    /// set is a plane containing non-generalizing solutions.
    pub degenerate: bool,
    pub generalizing: EdgeCountParams,
}

impl SolutionSpace {
    pub fn dimension(&self) -> usize {
        3 - self.constraints.len()
    }

    pub fn contains(&self, p: EdgeCountParams, tol: f64) -> bool {
        self.constraints
            .iter()
            .all(|(a, c)| (dot3(*a, p.as_array()) - c).abs() <= tol)
    }

    /// `w2 = 1/2 − (n / 2m)(w1 + b)` on a degenerate set with `m > 0`.
    pub fn point(&self, w1: f64, b: f64) -> Option<EdgeCountParams> {
        if !self.degenerate {
            return None;
        }
        let ([n, two_m, _], _) = self.constraints[0];
        (two_m != 0.0).then(|| EdgeCountParams::new(w1, 0.5 - n / two_m * (w1 + b), b))
    }

    /// Orthogonal projection onto the set.
    pub fn project(&self, p: EdgeCountParams) -> EdgeCountParams {
        let x = p.as_array();
        let k = self.constraints.len();
        let residual: Vec<f64> = self.constraints.iter().map(|(a, c)| dot3(*a, x) - c).collect();
        // Solve (A Aᵀ) λ = A x − c, then x − Aᵀ λ.
        let gram = |i: usize, j: usize| dot3(self.constraints[i].0, self.constraints[j].0);
        let lambda: Vec<f64> = match k {
            1 => vec![residual[0] / gram(0, 0)],
            2 => {
                let (g00, g01, g11) = (gram(0, 0), gram(0, 1), gram(1, 1));
                let det = g00 * g11 - g01 * g01;
                vec![
                    (g11 * residual[0] - g01 * residual[1]) / det,
                    (g00 * residual[1] - g01 * residual[0]) / det,
                ]
            }
            _ => Vec::new(),
        };
        let mut out = x;
        for (l, (a, _)) in lambda.iter().zip(&self.constraints) {
            for i in 0..3 {
                out[i] -= l * a[i];
            }
        }
        EdgeCountParams::from_array(out)
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn edge_count_solution_space(problem: &LinearEdgeCountProblem) -> Result<SolutionSpace> {
    let &(n0, m0) = problem.pairs.first().ok_or(Error::EmptyInput("edge-count pairs"))?;
    // (n, 2m) vectors are proportional iff n_i m_0 = n_0 m_i.
    let degenerate = problem
        .pairs
        .iter()
        .all(|&(n, m)| u128::from(n) * u128::from(m0) == u128::from(n0) * u128::from(m));
    let constraints = if degenerate {
        vec![LinearEdgeCountProblem::row(n0, m0)]
    } else {
        vec![([1.0, 0.0, 1.0], 0.0), ([0.0, 1.0, 0.0], 0.5)]
    };
    Ok(SolutionSpace {
        constraints,
        degenerate,
        generalizing: EdgeCountParams::GENERALIZING,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

/// Least-norm zero-loss parameters for a single pair.
///
/// L1: `|w1| + |b| >= |s|` with equality at `w1 = s, b = 0`, so the problem is
/// `min_s |s| + |1/2 − (n/2m) s|`, convex piecewise linear with kinks at
/// `s = 0` (value 1/2) and `s = m/n` (value m/n). Ties (`2m = n`) resolve to
/// `s = m/n`, so the result generalizes exactly when `2m > n`.
pub fn min_norm_solution(n: u64, m: u64, norm: Norm) -> Result<EdgeCountParams> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("min-norm solution needs n >= 1 and m >= 1".into()));
    }
    match norm {
        Norm::L1 => {
            if 2 * m > n {
                Ok(EdgeCountParams::GENERALIZING)
            } else {
                Ok(EdgeCountParams::new(m as f64 / n as f64, 0.0, 0.0))
            }
        }
        Norm::L2 => {
            let space = edge_count_solution_space(&LinearEdgeCountProblem::new(vec![(n, m)])?)?;
            Ok(space.project(EdgeCountParams::new(0.0, 0.0, 0.0)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdCheck {
    pub final_params: EdgeCountParams,
    pub predicted: EdgeCountParams,
    pub distance: f64,
    pub final_loss: f64,
}

/// Plain gradient descent from `init`; the least-squares gradient flow ends
/// at the orthogonal projection of `init` onto the zero-loss set.
pub fn gd_projection_check(
    problem: &LinearEdgeCountProblem,
    init: EdgeCountParams,
    lr: f64,
    steps: usize,
) -> Result<GdCheck> {
    if !(lr > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let space = edge_count_solution_space(problem)?;
    let mut x = init.as_array();
    let mut prev = problem.loss(init);
    let mut increases = 0;
    for step in 0..steps {
        let g = problem.gradient(EdgeCountParams::from_array(x));
        for i in 0..3 {
            x[i] -= lr * g[i];
        }
        let loss = problem.loss(EdgeCountParams::from_array(x));
        if !loss.is_finite() {
            return Err(Error::Diverged(step));
        }
        if loss > prev {
            increases += 1;
            if increases >= 100 {
                return Err(Error::Diverged(step));
            }
        } else {
            increases = 0;
        }
        prev = loss;
    }
    let final_params = EdgeCountParams::from_array(x);
    let predicted = space.project(init);
    Ok(GdCheck {
        final_params,
        predicted,
        distance: final_params.distance(predicted),
        final_loss: prev,
    })
}

/// The exact edge-counting GNN: one linear layer summing neighbour
/// indicators, sum readout, halved.
pub fn edge_count_gnn(num_classes: usize) -> GnnModel {
    let mut model = EdgeCountParams::new(0.0, 1.0, 0.0).to_gnn(num_classes);
    model.head_mut(MAIN_HEAD).expect("main head").mlp = DenseParams::new(
        1,
        vec![DenseLayer::new(Matrix::from_vec(1, 1, vec![0.5]).expect("1 × 1"), vec![0.0], Activation::Identity)
            .expect("bias matches")],
    )
    .expect("dims chain");
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_er;
    use crate::rng::RngStream;

    fn single(n: u64, m: u64) -> LinearEdgeCountProblem {
        LinearEdgeCountProblem::new(vec![(n, m)]).unwrap()
    }

    #[test]
    fn single_pair_plane() {
        let p = single(10, 15);
        assert_eq!(p.loss(EdgeCountParams::GENERALIZING), 0.0);
        let other = EdgeCountParams::new(0.1, 0.5 - (10.0 / 30.0) * 0.1, 0.0);
        assert!(p.loss(other) < 1e-24);
        let s = edge_count_solution_space(&p).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.dimension(), 2);
        let q = s.point(0.1, 0.0).unwrap();
        assert!(q.distance(other) < 1e-15);
    }

    #[test]
    fn two_ratios_force_generalization() {
        let p = LinearEdgeCountProblem::new(vec![(10, 15), (10, 30)]).unwrap();
        let s = edge_count_solution_space(&p).unwrap();
        assert!(!s.degenerate);
        assert_eq!(s.dimension(), 1);
        let x = s.project(EdgeCountParams::new(0.7, -3.0, 0.2));
        assert!(x.is_generalizing(1e-12));
        assert!(p.loss(x) < 1e-20);
        // Same ratio, different scale: still degenerate.
        let same = LinearEdgeCountProblem::new(vec![(10, 15), (20, 30)]).unwrap();
        assert!(edge_count_solution_space(&same).unwrap().degenerate);
    }

    #[test]
    fn no_edges_leaves_w2_free() {
        let s = edge_count_solution_space(&single(1, 0)).unwrap();
        assert!(s.contains(EdgeCountParams::new(0.4, 17.0, -0.4), 1e-12));
        assert!(!s.contains(EdgeCountParams::new(0.4, 17.0, 0.0), 1e-12));
    }

    #[test]
    fn least_norm_solutions() {
        assert_eq!(min_norm_solution(10, 15, Norm::L1).unwrap(), EdgeCountParams::GENERALIZING);
        let l1 = min_norm_solution(10, 3, Norm::L1).unwrap();
        assert_eq!((l1.w1 + l1.b, l1.w2), (0.3, 0.0));
        assert!(!l1.is_generalizing(1e-9));
        let l2 = min_norm_solution(10, 15, Norm::L2).unwrap();
        assert!(single(10, 15).loss(l2) < 1e-24);
        assert!(!l2.is_generalizing(1e-6));
        // a = (10, 30, 10), x = 15 a / |a|²
        let expected = EdgeCountParams::new(150.0 / 1100.0, 450.0 / 1100.0, 150.0 / 1100.0);
        assert!(l2.distance(expected) < 1e-15);
    }

    #[test]
    fn gd_lands_on_projection() {
        let p = single(10, 15);
        let r = gd_projection_check(&p, EdgeCountParams::new(0.3, 0.1, -0.2), 1e-4, 20_000).unwrap();
        assert!(r.distance < 1e-3, "{r:?}");
        let on = edge_count_solution_space(&p).unwrap().point(0.2, 0.1).unwrap();
        let r = gd_projection_check(&p, on, 1e-4, 100).unwrap();
        assert!(r.distance < 1e-12);
        assert!(r.final_params.distance(on) < 1e-12);
        let far = EdgeCountParams::new(1.0, 1.0, 1.0);
        assert!(matches!(gd_projection_check(&p, far, 1.0, 10_000), Err(Error::Diverged(_))));
    }

    #[test]
    fn edge_count_gnn_is_exact() {
        let mut rng = RngStream::new(20, 3);
        for _ in 0..5 {
            let g = gen_er(20, 0.3, &mut rng).unwrap();
            let y = edge_count_gnn(1).forward(&g, MAIN_HEAD).unwrap()[(0, 0)];
            assert!((y - g.num_edges() as f64).abs() < 1e-6);
        }
        let g = gen_er(12, 0.5, &mut rng).unwrap();
        let y = EdgeCountParams::GENERALIZING.to_gnn(1).forward(&g, MAIN_HEAD).unwrap()[(0, 0)];
        assert_eq!(y, g.num_edges() as f64);
    }
}
