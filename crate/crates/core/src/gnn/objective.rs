use std::sync::Arc;

use rayon::prelude::*;

use super::model::{GnnModel, Readout};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::neural::{accuracy, Evaluation, LossKind, Matrix, Objective, Parameters, Target};

/// A graph with the target for one head.
#[derive(Clone, Debug)]
pub struct GraphSample {
    pub graph: Arc<Graph>,
    /// One row for graph-level heads, one row per node for node-level heads.
    pub target: Target,
}

impl GraphSample {
    pub fn new(graph: Arc<Graph>, target: Target) -> Self {
        Self { graph, target }
    }
}

/// Supervised training of one head. Graph-level losses are averaged over
/// graphs, node-level losses over all nodes in the batch.
#[derive(Clone, Debug)]
pub struct GnnObjective {
    pub head: String,
    /// `None` trains every tensor.
    pub mask: Option<Vec<bool>>,
}

impl GnnObjective {
    pub fn new(head: &str) -> Self {
        Self {
            head: head.to_string(),
            mask: None,
        }
    }

    fn weights(&self, model: &GnnModel, batch: &[&GraphSample]) -> Result<Vec<f64>> {
        let readout = model.head(&self.head)?.readout;
        Ok(match readout {
            Readout::Sum => vec![1.0 / batch.len() as f64; batch.len()],
            Readout::None => {
                let total: usize = batch.iter().map(|s| s.graph.num_nodes()).sum();
                let total = total.max(1) as f64;
                batch.iter().map(|s| s.graph.num_nodes() as f64 / total).collect()
            }
        })
    }

    /// Weighted mean loss and gradient; per-graph work runs in parallel and
    /// is reduced in batch order.
    pub fn weighted_loss_and_grad(
        &self,
        model: &GnnModel,
        batch: &[&GraphSample],
        loss: LossKind,
        scale: f64,
    ) -> Result<(f64, GnnModel)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let weights = self.weights(model, batch)?;
        let parts: Vec<Result<(f64, GnnModel)>> = batch
            .par_iter()
            .map(|s| {
                let trace = model.trace(&s.graph, &self.head)?;
                let (v, d_out) = loss.value_and_grad(trace.output(), &s.target)?;
                Ok((v, model.backward(&s.graph, &trace, &d_out)?))
            })
            .collect();
        let mut total = 0.0;
        let mut grads = model.zeros_like();
        for (part, w) in parts.into_iter().zip(weights) {
            let (v, g) = part?;
            total += w * v;
            grads.add_scaled(&g, w * scale);
        }
        Ok((total * scale, grads))
    }

    pub fn predict(&self, model: &GnnModel, graphs: &[&Graph]) -> Result<Vec<Matrix>> {
        graphs
            .par_iter()
            .map(|g| model.forward(g, &self.head))
            .collect()
    }
}

impl Objective for GnnObjective {
    type Model = GnnModel;
    type Example = GraphSample;

    fn loss_and_grad(&self, model: &GnnModel, batch: &[&GraphSample], loss: LossKind) -> Result<(f64, GnnModel)> {
        self.weighted_loss_and_grad(model, batch, loss, 1.0)
    }

    fn evaluate(&self, model: &GnnModel, data: &[GraphSample], loss: LossKind) -> Result<Evaluation> {
        evaluate_head(model, &self.head, data, loss)
    }

    fn trainable_mask(&self, _model: &GnnModel) -> Option<Vec<bool>> {
        self.mask.clone()
    }
}

/// Mean loss (weighted like training) and, for class targets, accuracy.
pub fn evaluate_head(model: &GnnModel, head: &str, data: &[GraphSample], loss: LossKind) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation data"));
    }
    let readout = model.head(head)?.readout;
    let parts: Vec<Result<(f64, usize, Option<(usize, usize)>)>> = data
        .par_iter()
        .map(|s| {
            let out = model.forward(&s.graph, head)?;
            let v = loss.value(&out, &s.target)?;
            let acc = match &s.target {
                Target::Classes(labels) => {
                    let hits = (accuracy(&out, labels) * labels.len() as f64).round() as usize;
                    Some((hits, labels.len()))
                }
                Target::Values(_) => None,
            };
            Ok((v, s.graph.num_nodes(), acc))
        })
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut hits = 0usize;
    let mut seen = 0usize;
    let mut classified = false;
    for p in parts {
        let (v, n, acc) = p?;
        let w = match readout {
            Readout::Sum => 1.0,
            Readout::None => n as f64,
        };
        num += w * v;
        den += w;
        if let Some((h, c)) = acc {
            classified = true;
            hits += h;
            seen += c;
        }
    }
    Ok(Evaluation {
        loss: if den > 0.0 { num / den } else { 0.0 },
        accuracy: classified.then(|| hits as f64 / seen.max(1) as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{GnnArch, MAIN_HEAD};
    use crate::graph::gen_er;
    use crate::neural::{finite_diff_grad, train_loop, AdamConfig, AdamState, TrainConfig};
    use crate::rng::RngStream;

    fn edge_count_data(seed: u64, count: usize) -> Vec<GraphSample> {
        let mut rng = RngStream::new(seed, 0);
        (0..count)
            .map(|_| {
                let n = 5 + rng.below(6) as usize;
                let g = gen_er(n, 0.4, &mut rng).unwrap();
                let y = g.num_edges() as f64;
                GraphSample::new(Arc::new(g), Target::values(&[y]))
            })
            .collect()
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let data = edge_count_data(1, 3);
        let refs: Vec<&GraphSample> = data.iter().collect();
        let model = GnnModel::init(&GnnArch::standard(1, 2, 3, Readout::Sum), &mut RngStream::new(1, 1)).unwrap();
        let obj = GnnObjective::new(MAIN_HEAD);
        let (_, g) = obj.loss_and_grad(&model, &refs, LossKind::Mse).unwrap();
        let fd = finite_diff_grad(|m: &GnnModel| obj.loss_and_grad(m, &refs, LossKind::Mse).unwrap().0, &model, 1e-6);
        for (a, b) in g.flat().iter().zip(fd.flat()) {
            assert!((a - b).abs() / a.abs().max(b.abs()).max(1e-3) < 1e-5);
        }
    }

    #[test]
    fn learns_edge_count() {
        let train = edge_count_data(2, 40);
        let val = edge_count_data(3, 10);
        let model = GnnModel::init(&GnnArch::standard(1, 1, 8, Readout::Sum), &mut RngStream::new(2, 1)).unwrap();
        let obj = GnnObjective::new(MAIN_HEAD);
        let before = obj.evaluate(&model, &val, LossKind::Mse).unwrap().loss;
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-2, 0.0), &model);
        let mut cfg = TrainConfig::new(150, 8, 150, LossKind::Mse, RngStream::new(2, 2));
        let out = train_loop(&obj, model, &train, &val, &mut cfg, &mut adam).unwrap();
        assert!(out.best_val_loss < before * 1e-2, "{before} -> {}", out.best_val_loss);
    }
}
