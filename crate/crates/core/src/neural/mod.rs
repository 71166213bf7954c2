//! Dense neural-network kernel: matrices, MLPs, losses, ADAM and training.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod finite_diff;
pub mod loss;
pub mod matrix;
pub mod params;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{backprop, mlp_forward, Activation, DenseLayer, DenseParams, DenseTrace};
pub use finite_diff::finite_diff_grad;
pub use loss::{accuracy, argmax, LossKind, Target};
pub use matrix::Matrix;
pub use params::Parameters;
pub use train::{
    train_loop, DenseExample, DenseObjective, EpochRecord, Evaluation, Label, Objective, TrainConfig,
    TrainOutcome, ValidationMetric,
};
