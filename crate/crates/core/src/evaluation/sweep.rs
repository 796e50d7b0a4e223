use serde::Serialize;

use super::{eval_link_prediction, EvalError, EvalReport, Setting};
use crate::graph::{DatasetSplit, NodeId, TemporalGraph};
use crate::model::{FtmModel, ModelConfig};
use crate::training::{fit, FitReport, TrainConfig};

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na * nb))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub mean_cosine: f64,
    /// Nodes contributing at least one pair.
    pub nodes: usize,
    pub pairs: usize,
    /// Pairs dropped because an embedding had zero norm.
    pub skipped: usize,
}

/// Mean over nodes of the mean cosine between consecutive embeddings.
pub fn mean_successive_cosine(series: &[Vec<Vec<f64>>]) -> Result<StabilityReport, EvalError> {
    let mut per_node = Vec::new();
    let (mut pairs, mut skipped) = (0, 0);
    for embeddings in series {
        let mut sum = 0.0;
        let mut count = 0;
        for w in embeddings.windows(2) {
            match cosine_similarity(&w[0], &w[1]) {
                Some(c) => {
                    sum += c;
                    count += 1;
                }
                None => skipped += 1,
            }
        }
        if count > 0 {
            per_node.push(sum / count as f64);
            pairs += count;
        }
    }
    if per_node.is_empty() {
        return Err(EvalError::Input("no node has two nonzero successive embeddings".into()));
    }
    Ok(StabilityReport {
        mean_cosine: per_node.iter().sum::<f64>() / per_node.len() as f64,
        nodes: per_node.len(),
        pairs,
        skipped,
    })
}

/// Timestamps of a node's interactions, oldest first.
pub fn interaction_times(graph: &TemporalGraph, node: NodeId) -> Result<Vec<f64>, EvalError> {
    Ok(graph.adjacency(node)?.iter().map(|&i| graph.link(i).timestamp).collect())
}

pub fn embedding_stability(
    model: &FtmModel,
    graph: &TemporalGraph,
    probes: &[(NodeId, Vec<f64>)],
) -> Result<StabilityReport, EvalError> {
    let mut series = Vec::with_capacity(probes.len());
    for (node, times) in probes {
        if times.len() < 2 {
            return Err(EvalError::Input(format!("node {node} needs at least two evaluation times")));
        }
        let queries: Vec<_> = times.iter().map(|&t| (*node, t)).collect();
        series.push(model.embeddings(graph, &queries)?);
    }
    mean_successive_cosine(&series)
}

/// Chronological prefix of the training and validation links.
pub fn subsample_split(split: &DatasetSplit, fraction: f64) -> Result<DatasetSplit, EvalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EvalError::Input(format!("data fraction {fraction} outside (0, 1]")));
    }
    let take = |n: usize| ((fraction * n as f64) + 1e-9).floor() as usize;
    let train = take(split.train.len());
    let validation = take(split.validation.len());
    if train < 2 {
        return Err(EvalError::Input(format!(
            "fraction {fraction} leaves {train} training link(s); at least 2 are needed"
        )));
    }
    if validation == 0 {
        return Err(EvalError::Input(format!("fraction {fraction} leaves no validation links")));
    }
    Ok(DatasetSplit {
        train: split.train[..train].to_vec(),
        validation: split.validation[..validation].to_vec(),
        ..split.clone()
    })
}

/// Fresh model, [`fit`], then test-set link prediction.
pub fn train_and_evaluate(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    graph: &TemporalGraph,
    split: &DatasetSplit,
    setting: Setting,
) -> Result<(FtmModel, FitReport, EvalReport), EvalError> {
    let mut model = FtmModel::new(model_config.clone(), train_config.seed)?;
    let fitted = fit(&mut model, graph, split, train_config, &mut std::io::sink()).map_err(Box::new)?;
    let report = eval_link_prediction(&model, graph, split, setting, train_config.seed)?;
    Ok((model, fitted, report))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// `(layers, frame length)` pairs.
    Neighborhood(Vec<(usize, usize)>),
    /// Fractions of the training and validation links.
    DataFraction(Vec<f64>),
}

impl SweepAxis {
    pub fn neighborhood() -> Self {
        Self::Neighborhood(vec![(1, 10), (1, 20), (2, 10), (2, 20)])
    }

    pub fn data_fraction() -> Self {
        Self::DataFraction(vec![0.01, 0.05, 0.10, 0.50])
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Neighborhood(g) => g.len(),
            Self::DataFraction(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub layers: usize,
    pub frame_len: usize,
    pub fraction: f64,
    pub best_val_ap: Option<f64>,
    pub report: EvalReport,
}

/// One trained model per grid point. Point `k` trains with seed
/// `seed + k`.
pub fn case_study_sweep(
    axis: &SweepAxis,
    graph: &TemporalGraph,
    split: &DatasetSplit,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    setting: Setting,
) -> Result<Vec<SweepRow>, EvalError> {
    let mut rows = Vec::with_capacity(axis.len());
    for k in 0..axis.len() {
        let mut mc = model_config.clone();
        let tc = TrainConfig {
            seed: train_config.seed.wrapping_add(k as u64),
            ..train_config.clone()
        };
        let (label, fraction, point_split) = match axis {
            SweepAxis::Neighborhood(grid) => {
                let (layers, frame_len) = grid[k];
                mc.layers = layers;
                mc.frame_len = frame_len;
                (format!("({layers}, {frame_len})"), 1.0, split.clone())
            }
            SweepAxis::DataFraction(grid) => {
                let f = grid[k];
                (format!("{}%", f * 100.0), f, subsample_split(split, f)?)
            }
        };
        let (_, fitted, report) = train_and_evaluate(&mc, &tc, graph, &point_split, setting)?;
        rows.push(SweepRow {
            label,
            layers: mc.layers,
            frame_len: mc.frame_len,
            fraction,
            best_val_ap: fitted.best_val_ap,
            report,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_orthogonal_series() {
        let constant = vec![vec![vec![1.0, 2.0]; 4]];
        assert!((mean_successive_cosine(&constant).unwrap().mean_cosine - 1.0).abs() < 1e-15);
        let ortho = vec![vec![vec![1.0, 0.0], vec![0.0, 3.0], vec![2.0, 0.0]]];
        assert_eq!(mean_successive_cosine(&ortho).unwrap().mean_cosine, 0.0);
    }

    #[test]
    fn zero_vectors_are_skipped_and_counted() {
        let s = vec![vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]];
        let r = mean_successive_cosine(&s).unwrap();
        assert_eq!((r.pairs, r.skipped), (1, 2));
        assert_eq!(r.mean_cosine, 1.0);
    }

    #[test]
    fn tiny_fraction_is_rejected() {
        let split = DatasetSplit {
            train: (0..100).collect(),
            validation: (100..120).collect(),
            test: (120..140).collect(),
            new_nodes: Default::default(),
            masked: vec![],
        };
        assert!(matches!(subsample_split(&split, 0.01), Err(EvalError::Input(_))));
        let half = subsample_split(&split, 0.5).unwrap();
        assert_eq!(half.train, (0..50).collect::<Vec<_>>());
        assert_eq!(half.validation.len(), 10);
        assert_eq!(half.test, split.test);
    }
}
