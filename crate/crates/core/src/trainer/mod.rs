//! The online EM loop and its supporting pieces.

mod augment;
mod em_check;
mod eval;
mod loss;
mod metrics;
mod train;

pub use augment::{AugmentConfig, Augmenter, View};
pub use em_check::{exact_em_check, q_objective, EmCheckConfig, EmTrace};
pub use eval::{evaluate, observed_log_likelihood};
pub use loss::{batch_loss, e_step, group_weights, loss_given_targets, BatchInput, BatchLoss, EStep, LossParts};
pub use metrics::{write_metrics_csv, MetricsRecord, METRICS_HEADER};
pub use train::{train, TrainConfig, TrainOutcome};
