//! Minibatch ADAM with validation-based early stopping.

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::dense::DenseParams;
use super::loss::{accuracy, LossKind, Target};
use super::matrix::Matrix;
use super::params::Parameters;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMetric {
    /// Lower is better.
    Loss,
    /// Higher is better; the objective must report accuracy.
    Accuracy,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub metric: ValidationMetric,
    pub rng: RngStream,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn new(max_epochs: usize, batch_size: usize, patience: usize, loss: LossKind, rng: RngStream) -> Self {
        Self {
            max_epochs,
            batch_size,
            patience,
            metric: ValidationMetric::Loss,
            rng,
            loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: Option<f64>,
}

/// A supervised problem the training loop can drive.
pub trait Objective {
    type Model: Parameters + Clone;
    type Example;

    /// Mean loss over `batch` and its gradient.
    fn loss_and_grad(
        &self,
        model: &Self::Model,
        batch: &[&Self::Example],
        loss: LossKind,
    ) -> Result<(f64, Self::Model)>;

    fn evaluate(&self, model: &Self::Model, data: &[Self::Example], loss: LossKind) -> Result<Evaluation>;

    /// Per-tensor mask; `None` trains everything.
    fn trainable_mask(&self, _model: &Self::Model) -> Option<Vec<bool>> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub history: Vec<EpochRecord>,
    /// 0 means no epoch beat the initial parameters.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn score(metric: ValidationMetric, e: &Evaluation) -> Result<f64> {
    match metric {
        ValidationMetric::Loss => Ok(e.loss),
        ValidationMetric::Accuracy => e
            .accuracy
            .map(|a| -a)
            .ok_or_else(|| Error::InvalidArgument("objective does not report accuracy".into())),
    }
}

/// Trains `model` in place of a copy and returns the best-validation copy.
/// With empty `val`, the training set doubles as validation set.
pub fn train_loop<O: Objective>(
    objective: &O,
    model: O::Model,
    train: &[O::Example],
    val: &[O::Example],
    cfg: &mut TrainConfig,
    adam: &mut AdamState,
) -> Result<TrainOutcome<O::Model>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("train data"));
    }
    let val = if val.is_empty() { train } else { val };
    let mask = objective.trainable_mask(&model);

    let initial = objective.evaluate(&model, val, cfg.loss)?;
    let mut best_score = score(cfg.metric, &initial)?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val_loss = initial.loss;

    let mut model = model;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        cfg.rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&O::Example> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = objective.loss_and_grad(&model, &batch, cfg.loss)?;
            total += loss * chunk.len() as f64;
            adam.step(&mut model, &grads, mask.as_deref())?;
        }
        let eval = objective.evaluate(&model, val, cfg.loss)?;
        history.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_loss: eval.loss,
            val_accuracy: eval.accuracy,
        });
        let s = score(cfg.metric, &eval)?;
        if s < best_score {
            best_score = s;
            best = model.clone();
            best_epoch = epoch;
            best_val_loss = eval.loss;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_val_loss,
    })
}

/// Input/label pair for a plain MLP.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseExample {
    pub x: Vec<f64>,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Values(Vec<f64>),
    Class(usize),
}

/// Supervised training of a [`DenseParams`] MLP.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseObjective;

fn stack(batch: &[&DenseExample]) -> Result<(Matrix, Target)> {
    let width = batch.first().map_or(0, |e| e.x.len());
    let mut xs = Vec::with_capacity(batch.len() * width);
    for e in batch {
        if e.x.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: e.x.len(),
                context: "example width",
            });
        }
        xs.extend_from_slice(&e.x);
    }
    let x = Matrix::from_vec(batch.len(), width, xs)?;
    let target = match batch.first().map(|e| &e.label) {
        Some(Label::Class(_)) => Target::Classes(
            batch
                .iter()
                .map(|e| match e.label {
                    Label::Class(c) => Ok(c),
                    Label::Values(_) => Err(Error::InvalidArgument("mixed label kinds".into())),
                })
                .collect::<Result<_>>()?,
        ),
        _ => {
            let rows: Vec<Vec<f64>> = batch
                .iter()
                .map(|e| match &e.label {
                    Label::Values(v) => Ok(v.clone()),
                    Label::Class(_) => Err(Error::InvalidArgument("mixed label kinds".into())),
                })
                .collect::<Result<_>>()?;
            Target::Values(Matrix::from_rows(&rows)?)
        }
    };
    Ok((x, target))
}

impl Objective for DenseObjective {
    type Model = DenseParams;
    type Example = DenseExample;

    fn loss_and_grad(&self, model: &DenseParams, batch: &[&DenseExample], loss: LossKind) -> Result<(f64, DenseParams)> {
        let (x, target) = stack(batch)?;
        let trace = model.trace_batch(&x)?;
        let (value, d_out) = loss.value_and_grad(trace.output(), &target)?;
        let (grads, _) = model.backward(&trace, &d_out)?;
        Ok((value, grads))
    }

    fn evaluate(&self, model: &DenseParams, data: &[DenseExample], loss: LossKind) -> Result<Evaluation> {
        let refs: Vec<&DenseExample> = data.iter().collect();
        let (x, target) = stack(&refs)?;
        let out = model.forward_batch(&x)?;
        let value = loss.value(&out, &target)?;
        let acc = match &target {
            Target::Classes(labels) => Some(accuracy(&out, labels)),
            Target::Values(_) => None,
        };
        Ok(Evaluation { loss: value, accuracy: acc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{AdamConfig, Activation, DenseLayer};

    fn linear_data(rng: &mut RngStream, n: usize) -> Vec<DenseExample> {
        (0..n)
            .map(|_| {
                let x = vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
                let y = 1.5 * x[0] - 0.5 * x[1] + 0.25;
                DenseExample { x, label: Label::Values(vec![y]) }
            })
            .collect()
    }

    #[test]
    fn realizable_linear_regression() {
        let mut rng = RngStream::new(7, 0);
        let data = linear_data(&mut rng, 64);
        let model = DenseParams::init(&[2, 1], &[Activation::Identity], &mut rng).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-2, 0.0), &model);
        let mut cfg = TrainConfig::new(3000, 16, 3000, LossKind::Mse, RngStream::new(7, 1));
        let out = train_loop(&DenseObjective, model, &data, &[], &mut cfg, &mut adam).unwrap();
        let eval = DenseObjective.evaluate(&out.model, &data, LossKind::Mse).unwrap();
        assert!(eval.loss < 1e-6, "train mse {}", eval.loss);
    }

    #[test]
    fn global_minimum_is_kept() {
        let mut rng = RngStream::new(8, 0);
        let data = linear_data(&mut rng, 16);
        let w = Matrix::from_vec(1, 2, vec![1.5, -0.5]).unwrap();
        let model = DenseParams::new(2, vec![DenseLayer::new(w, vec![0.25], Activation::Identity).unwrap()]).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-3, 0.0), &model);
        let mut cfg = TrainConfig::new(20, 4, 5, LossKind::Mse, RngStream::new(8, 1));
        let out = train_loop(&DenseObjective, model.clone(), &data, &data, &mut cfg, &mut adam).unwrap();
        assert_eq!(out.model, model);
        let first = out.history[0].train_loss;
        assert!(out.history.iter().all(|h| (h.train_loss - first).abs() < 1e-20));
    }

    #[test]
    fn deterministic_history_and_best_epoch() {
        let run = || {
            let mut rng = RngStream::new(9, 0);
            let data = linear_data(&mut rng, 40);
            let (train, val) = data.split_at(30);
            let model = DenseParams::init(&[2, 8, 1], &[Activation::Tanh, Activation::Identity], &mut rng).unwrap();
            let mut adam = AdamState::new(AdamConfig::default(), &model);
            let mut cfg = TrainConfig::new(60, 8, 10, LossKind::Mse, RngStream::new(9, 1));
            train_loop(&DenseObjective, model, train, val, &mut cfg, &mut adam).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        if a.best_epoch > 0 {
            let best = a.history[a.best_epoch - 1].val_loss;
            assert!(a.history.iter().all(|h| best <= h.val_loss));
        }
    }

    #[test]
    fn empty_train_rejected() {
        let model = DenseParams::identity(1);
        let mut adam = AdamState::new(AdamConfig::default(), &model);
        let mut cfg = TrainConfig::new(1, 1, 1, LossKind::Mse, RngStream::new(0, 0));
        assert!(train_loop(&DenseObjective, model, &[], &[], &mut cfg, &mut adam).is_err());
    }
}
