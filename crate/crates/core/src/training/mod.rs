//! Contrastive future-link training: every training link is a positive pair
//! scored against uniformly sampled negative destinations.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::{link_prediction_ap, EvalError};
use crate::graph::{DatasetSplit, NodeId, TemporalGraph};
use crate::model::{FtmModel, ModelError, Session};
use crate::tensor::{Adam, ParamStore, Tape, TensorError, Var};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("loss became {value} in the batch starting at t = {first_time} ({items} items)")]
    NonFiniteLoss { value: f64, first_time: f64, items: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("writing epoch log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Negatives per positive.
    pub negatives: usize,
    pub seed: u64,
    /// Non-improving epochs tolerated before stopping.
    pub patience: usize,
    /// Adds wall-clock seconds to the epoch log (which then differs
    /// between otherwise identical runs).
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 10,
            batch_size: 200,
            negatives: 1,
            seed: 0,
            patience: 3,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.negatives == 0 {
            return Err(TrainError::Config("at least one negative per positive is required".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(TrainError::Config(format!("learning rate {} is invalid", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub src: NodeId,
    pub dst: NodeId,
    pub time: f64,
    pub negatives: Vec<NodeId>,
}

/// `count` nodes drawn uniformly from `universe`, redrawing the true
/// destination.
pub fn sample_negatives<R: Rng>(
    rng: &mut R,
    universe: &[NodeId],
    dst: NodeId,
    count: usize,
) -> Result<Vec<NodeId>, TrainError> {
    if !universe.iter().any(|&n| n != dst) {
        return Err(TrainError::Config(format!(
            "negative sampling needs a node other than the destination; universe has {} node(s)",
            universe.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q = universe[rng.random_range(0..universe.len())];
        if q != dst {
            out.push(q);
        }
    }
    Ok(out)
}

/// Distinct destinations of the given links, the negative-sampling pool.
pub fn destination_universe(graph: &TemporalGraph, links: &[usize]) -> Vec<NodeId> {
    links
        .iter()
        .map(|&i| graph.link(i).dst)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-item loss on raw scores: `−log σ(pos) + Σ −log σ(−neg)`.
pub fn contrastive_loss(positive: f64, negatives: &[f64]) -> f64 {
    -log_sigmoid(positive) - negatives.iter().map(|&s| log_sigmoid(-s)).sum::<f64>()
}

/// Derivatives of [`contrastive_loss`] with respect to each score.
pub fn contrastive_loss_grad(positive: f64, negatives: &[f64]) -> (f64, Vec<f64>) {
    (-sigmoid(-positive), negatives.iter().map(|&s| sigmoid(s)).collect())
}

/// Mean per-item loss of a batch recorded on the session's tape.
pub fn batch_loss(session: &Session<'_>, batch: &[BatchItem]) -> Result<Var, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Config("empty batch".into()));
    }
    let tape = session.tape();
    let mut terms = Vec::with_capacity(batch.len() * 2);
    for item in batch {
        let pos = session.score(item.src, item.dst, item.time)?;
        terms.push(tape.log_sigmoid(pos)?);
        for &q in &item.negatives {
            let neg = session.score(item.src, q, item.time)?;
            terms.push(tape.log_sigmoid(tape.scale(neg, -1.0)?)?);
        }
    }
    let stacked = tape.concat_cols(&terms)?;
    let total = tape.sum(stacked)?;
    let loss = tape.scale(total, -1.0 / batch.len() as f64)?;
    let value = tape.scalar_value(loss);
    if !value.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            value,
            first_time: batch[0].time,
            items: batch.len(),
        });
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub batches: usize,
    pub seconds: f64,
}

/// Chronological slices of `graph`'s links with freshly drawn negatives.
pub fn make_batches<R: Rng>(
    graph: &TemporalGraph,
    universe: &[NodeId],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<Vec<BatchItem>>, TrainError> {
    graph
        .links()
        .chunks(config.batch_size)
        .map(|chunk| {
            chunk
                .iter()
                .map(|link| {
                    Ok(BatchItem {
                        src: link.src,
                        dst: link.dst,
                        time: link.timestamp,
                        negatives: sample_negatives(rng, universe, link.dst, config.negatives)?,
                    })
                })
                .collect()
        })
        .collect()
}

/// One pass over `graph`'s links in chronological order, one optimizer step
/// per batch.
pub fn train_epoch<R: Rng>(
    model: &mut FtmModel,
    adam: &mut Adam,
    graph: &TemporalGraph,
    universe: &[NodeId],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<EpochStats, TrainError> {
    config.validate()?;
    let started = Instant::now();
    let mut weighted = 0.0;
    let mut batches = 0;
    for batch in make_batches(graph, universe, config, rng)? {
        let grads = {
            let tape = Tape::new();
            let session = model.session(graph, &tape)?;
            let loss = batch_loss(&session, &batch)?;
            weighted += tape.scalar_value(loss) * batch.len() as f64;
            tape.backward(loss, model.params())?
        };
        adam.learning_rate = config.learning_rate;
        adam.step(model.params_mut(), &grads)?;
        batches += 1;
    }
    Ok(EpochStats {
        mean_loss: weighted / graph.len().max(1) as f64,
        batches,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub history: Vec<EpochRecord>,
    /// Wall time of every epoch, whether or not it went to the log.
    pub epoch_seconds: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub best_val_ap: Option<f64>,
    pub best_params: ParamStore,
}

/// Seed offset for validation negatives, so they stay fixed across epochs.
const VALIDATION_STREAM: u64 = 0x5eed_0f_0a1;

/// Trains on the split's training links and keeps the parameters with the
/// best validation AP. The model ends up holding those parameters.
/// One JSON object per epoch is written to `log`.
pub fn fit(
    model: &mut FtmModel,
    graph: &TemporalGraph,
    split: &DatasetSplit,
    config: &TrainConfig,
    log: &mut dyn Write,
) -> Result<FitReport, TrainError> {
    config.validate()?;
    if split.validation.is_empty() {
        return Err(TrainError::Config("validation set is empty".into()));
    }
    let train_graph = graph.subgraph(&split.train);
    let universe = destination_universe(graph, &split.train);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.params(), config.learning_rate);

    let mut report = FitReport {
        history: Vec::new(),
        epoch_seconds: Vec::new(),
        best_epoch: None,
        best_val_ap: None,
        best_params: model.params().clone(),
    };
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        let stats = train_epoch(model, &mut adam, &train_graph, &universe, config, &mut rng)?;
        let val_ap = link_prediction_ap(
            &*model,
            graph,
            &split.validation,
            &universe,
            config.seed ^ VALIDATION_STREAM,
        )?;
        let record = EpochRecord {
            epoch,
            train_loss: stats.mean_loss,
            val_ap,
            seconds: config.record_wall_time.then_some(stats.seconds),
        };
        serde_json::to_writer(&mut *log, &record).map_err(std::io::Error::from)?;
        writeln!(log)?;
        log::info!("epoch {epoch}: loss {:.5} val AP {:.4} ({:.1}s)", stats.mean_loss, val_ap, stats.seconds);
        report.history.push(record);
        report.epoch_seconds.push(stats.seconds);

        if report.best_val_ap.is_none_or(|best| val_ap > best) {
            report.best_val_ap = Some(val_ap);
            report.best_epoch = Some(epoch);
            report.best_params = model.params().clone();
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }
    model.set_params(report.best_params.clone())?;
    Ok(report)
}
