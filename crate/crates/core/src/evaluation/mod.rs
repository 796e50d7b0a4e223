//! Metrics and experiment harnesses: link prediction AP, node
//! classification AUC under noise, transfer, embedding stability and
//! hyper-parameter sweeps.

mod classify;
mod link;
mod metrics;
mod report;
mod sweep;

pub use classify::{
    attack_eval, finetune_node_classifier, fit_logistic, labeled_instances, AttackResult, AttackSweep,
    ClassifierConfig, LogisticModel,
};
pub use link::{
    eval_link_prediction, eval_negatives, link_prediction_ap, test_links, transfer_eval, LinkScorer, Setting,
};
pub use metrics::{average_precision, roc_auc};
pub use report::{render_table, EvalReport};
pub use sweep::{
    case_study_sweep, cosine_similarity, embedding_stability, interaction_times, mean_successive_cosine,
    subsample_split, train_and_evaluate, SweepAxis, SweepRow, StabilityReport,
};

use crate::graph::GraphError;
use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("average precision is undefined without positive labels")]
    NoPositives,
    #[error("both classes must be present")]
    SingleClass,
    #[error("no links left to evaluate: {0}")]
    EmptyTestSet(String),
    #[error("score {0} is not a number")]
    NonFiniteScore(f64),
    #[error("invalid evaluation input: {0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Train(#[from] Box<crate::training::TrainError>),
}
