use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{average_precision, EvalError, EvalReport};
use crate::graph::{DatasetSplit, NodeId, TemporalGraph};
use crate::model::FtmModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Transductive,
    Inductive,
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transductive" => Ok(Self::Transductive),
            "inductive" => Ok(Self::Inductive),
            other => Err(format!("unknown setting `{other}` (transductive|inductive)")),
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Transductive => "transductive",
            Self::Inductive => "inductive",
        })
    }
}

/// Anything that can score `(src, dst, time)` queries on a graph.
pub trait LinkScorer {
    fn score_queries(&self, graph: &TemporalGraph, queries: &[(NodeId, NodeId, f64)]) -> Result<Vec<f64>, EvalError>;
}

impl LinkScorer for FtmModel {
    fn score_queries(&self, graph: &TemporalGraph, queries: &[(NodeId, NodeId, f64)]) -> Result<Vec<f64>, EvalError> {
        Ok(self.score_links(graph, queries)?)
    }
}

impl<F> LinkScorer for F
where
    F: Fn(NodeId, NodeId, f64) -> f64,
{
    fn score_queries(&self, _: &TemporalGraph, queries: &[(NodeId, NodeId, f64)]) -> Result<Vec<f64>, EvalError> {
        Ok(queries.iter().map(|&(i, j, t)| self(i, j, t)).collect())
    }
}

/// One negative destination per link, uniform over `universe` minus the
/// true destination.
pub fn eval_negatives(
    graph: &TemporalGraph,
    links: &[usize],
    universe: &[NodeId],
    seed: u64,
) -> Result<Vec<NodeId>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    links
        .iter()
        .map(|&i| {
            let dst = graph.link(i).dst;
            if !universe.iter().any(|&n| n != dst) {
                return Err(EvalError::Input("no negative destination available".into()));
            }
            loop {
                let q = universe[rng.random_range(0..universe.len())];
                if q != dst {
                    return Ok(q);
                }
            }
        })
        .collect()
}

/// AP of true links against one sampled negative each.
pub fn link_prediction_ap(
    scorer: &dyn LinkScorer,
    graph: &TemporalGraph,
    links: &[usize],
    universe: &[NodeId],
    seed: u64,
) -> Result<f64, EvalError> {
    if links.is_empty() {
        return Err(EvalError::EmptyTestSet("no links given".into()));
    }
    let negatives = eval_negatives(graph, links, universe, seed)?;
    let mut queries = Vec::with_capacity(links.len() * 2);
    let mut labels = Vec::with_capacity(links.len() * 2);
    for (&i, &q) in links.iter().zip(&negatives) {
        let l = graph.link(i);
        queries.push((l.src, l.dst, l.timestamp));
        labels.push(true);
        queries.push((l.src, q, l.timestamp));
        labels.push(false);
    }
    let scores = scorer.score_queries(graph, &queries)?;
    average_precision(&scores, &labels)
}

/// Test links for a setting: transductive keeps links between nodes seen in
/// training, inductive keeps links touching a new node.
pub fn test_links(graph: &TemporalGraph, split: &DatasetSplit, setting: Setting) -> Vec<usize> {
    let seen = split.train_nodes(graph);
    split
        .test
        .iter()
        .copied()
        .filter(|&i| {
            let l = graph.link(i);
            match setting {
                Setting::Transductive => seen.contains(&l.src) && seen.contains(&l.dst),
                Setting::Inductive => split.new_nodes.contains(&l.src) || split.new_nodes.contains(&l.dst),
            }
        })
        .collect()
}

fn all_destinations(graph: &TemporalGraph) -> Vec<NodeId> {
    graph.links().iter().map(|l| l.dst).collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn eval_link_prediction(
    scorer: &dyn LinkScorer,
    graph: &TemporalGraph,
    split: &DatasetSplit,
    setting: Setting,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let links = test_links(graph, split, setting);
    if links.is_empty() {
        return Err(EvalError::EmptyTestSet(format!("no {setting} test links")));
    }
    let value = link_prediction_ap(scorer, graph, &links, &all_destinations(graph), seed)?;
    Ok(EvalReport {
        task: "link".into(),
        setting: Some(setting),
        metric: "AP".into(),
        value,
        instances: links.len() * 2,
        seed,
        config: serde_json::Value::Null,
    })
}

/// Link prediction on another dataset without retraining. Link features are
/// padded or truncated to the model's width.
pub fn transfer_eval(
    model: &FtmModel,
    target: &TemporalGraph,
    split: &DatasetSplit,
    setting: Setting,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let width = model.config().link_feature_dim;
    let mut report = if target.feature_dim() == width {
        eval_link_prediction(model, target, split, setting, seed)?
    } else {
        log::warn!(
            "target link features have width {}, model expects {width}; padding/truncating",
            target.feature_dim()
        );
        let adapted = target.with_feature_dim(width);
        eval_link_prediction(model, &adapted, split, setting, seed)?
    };
    report.task = "transfer".into();
    Ok(report)
}
