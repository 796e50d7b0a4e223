//! Command implementations behind the `ftm` binary.

pub mod commands;
pub mod config;

use std::path::Path;

use ftm_core::evaluation::EvalError;
use ftm_core::graph::GraphError;
use ftm_core::model::ModelError;
use ftm_core::tensor::TensorError;
use ftm_core::training::TrainError;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable input, unwritable output, malformed data files.
    Input(String),
    /// Invalid configuration or incompatible shapes.
    Config(String),
    /// Non-finite values during training or evaluation.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Validation(_) | GraphError::UnknownNode(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::Checkpoint(_) | TensorError::Io(_) => CliError::Input(e.to_string()),
            TensorError::NonFiniteGradient(_) | TensorError::Domain { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => t.into(),
            ModelError::Graph(g) => g.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Graph(g) => g.into(),
            EvalError::Tensor(t) => t.into(),
            EvalError::Train(t) => (*t).into(),
            EvalError::NonFiniteScore(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Tensor(t) => t.into(),
            TrainError::Eval(v) => v.into(),
            TrainError::Io(_) => CliError::Input(e.to_string()),
            TrainError::Config(_) => CliError::Config(e.to_string()),
        }
    }
}
