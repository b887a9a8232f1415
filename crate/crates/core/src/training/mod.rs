mod loss;
mod metrics;
mod split;
mod trainer;

pub use loss::{cross_entropy, cross_entropy_logit_grad, PROB_FLOOR};
pub use metrics::{argmax, compute_metrics, roc_curve, trapezoid_auc, ClassMetrics, Metrics, TOP_CLASSES};
pub use split::{make_split, LabeledWindow, SplitMode, SplitPlan, TRAIN_FRACTION};
pub use trainer::{evaluate, predict_probs, train, EpochRecord, TrainConfig, TrainOutcome, TrainReport};
