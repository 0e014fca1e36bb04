//! Scorers, optimizers and the training loops.

mod optim;
mod scorer;
mod train;

pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use scorer::{predict_labels, Activation, Scorer, ScorerKind, ScorerSpec};
pub use train::{
    accuracy, train_ntmp, train_plan, train_supervised, train_with, Cursor, EpochRecord, TrainConfig, TrainTrace,
};
pub(crate) use scorer::dot;
