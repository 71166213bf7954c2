use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean over every output entry.
    Mse,
    /// Softmax cross-entropy, mean over rows.
    CrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
        }
    }

    pub fn value(self, output: &Matrix, target: &Target) -> Result<f64> {
        self.value_and_grad(output, target).map(|(v, _)| v)
    }

    /// Loss and its gradient with respect to `output`.
    pub fn value_and_grad(self, output: &Matrix, target: &Target) -> Result<(f64, Matrix)> {
        match (self, target) {
            (LossKind::Mse, Target::Values(y)) => {
                if (y.rows(), y.cols()) != (output.rows(), output.cols()) {
                    return Err(Error::DimensionMismatch {
                        expected: output.rows() * output.cols(),
                        actual: y.rows() * y.cols(),
                        context: "mse target shape",
                    });
                }
                let count = output.data().len().max(1) as f64;
                let mut grad = Matrix::zeros(output.rows(), output.cols());
                let mut total = 0.0;
                for ((g, o), t) in grad.data_mut().iter_mut().zip(output.data()).zip(y.data()) {
                    let r = o - t;
                    total += r * r;
                    *g = 2.0 * r / count;
                }
                Ok((total / count, grad))
            }
            (LossKind::CrossEntropy, Target::Classes(labels)) => {
                if labels.len() != output.rows() {
                    return Err(Error::DimensionMismatch {
                        expected: output.rows(),
                        actual: labels.len(),
                        context: "cross-entropy label count",
                    });
                }
                let rows = output.rows().max(1) as f64;
                let mut grad = Matrix::zeros(output.rows(), output.cols());
                let mut total = 0.0;
                for (i, &label) in labels.iter().enumerate() {
                    let logits = output.row(i);
                    if label >= logits.len() {
                        return Err(Error::InvalidArgument(format!(
                            "label {label} with {} logits",
                            logits.len()
                        )));
                    }
                    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                    let log_z = max + sum.ln();
                    total += log_z - logits[label];
                    for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
                        let p = (logits[j] - log_z).exp();
                        *g = (p - f64::from(u8::from(j == label))) / rows;
                    }
                }
                Ok((total / rows, grad))
            }
            _ => Err(Error::InvalidArgument(format!(
                "target kind does not match loss {}",
                self.name()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Values(Matrix),
    Classes(Vec<usize>),
}

impl Target {
    /// One-row regression target.
    pub fn values(y: &[f64]) -> Self {
        Target::Values(Matrix::row_vector(y))
    }

    pub fn rows(&self) -> usize {
        match self {
            Target::Values(m) => m.rows(),
            Target::Classes(c) => c.len(),
        }
    }
}

/// Fraction of rows whose argmax matches the label.
pub fn accuracy(output: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| argmax(output.row(i)) == l)
        .count();
    hits as f64 / labels.len() as f64
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}
