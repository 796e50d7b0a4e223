use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GraphError, NodeId, NodeKey, TemporalGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitConfig {
    pub train_ratio: f64,
    pub validation_ratio: f64,
    pub test_ratio: f64,
    pub new_node_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_ratio: 0.70,
            validation_ratio: 0.15,
            test_ratio: 0.15,
            new_node_fraction: 0.10,
            seed: 0,
        }
    }
}

/// Chronological partition of link indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Nodes held out of training for inductive evaluation.
    pub new_nodes: BTreeSet<NodeId>,
    /// Train-span links dropped because they touch a new node.
    pub masked: Vec<usize>,
}

impl DatasetSplit {
    /// Nodes incident to at least one training link.
    pub fn train_nodes(&self, g: &TemporalGraph) -> BTreeSet<NodeId> {
        self.train
            .iter()
            .flat_map(|&i| {
                let l = g.link(i);
                [l.src, l.dst]
            })
            .collect()
    }

    pub fn manifest(&self, g: &TemporalGraph) -> SplitManifest {
        let first_time = |ids: &[usize]| ids.first().map(|&i| g.link(i).timestamp);
        SplitManifest {
            links: g.len(),
            train_links: self.train.len(),
            validation_links: self.validation.len(),
            test_links: self.test.len(),
            masked_links: self.masked.len(),
            train_end_time: self.train.last().map(|&i| g.link(i).timestamp),
            validation_start_time: first_time(&self.validation),
            test_start_time: first_time(&self.test),
            new_nodes: self.new_nodes.iter().map(|&n| g.key(n)).collect(),
        }
    }
}

/// JSON document describing a split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitManifest {
    pub links: usize,
    pub train_links: usize,
    pub validation_links: usize,
    pub test_links: usize,
    pub masked_links: usize,
    pub train_end_time: Option<f64>,
    pub validation_start_time: Option<f64>,
    pub test_start_time: Option<f64>,
    pub new_nodes: Vec<NodeKey>,
}

fn boundary(fraction: f64, n: usize) -> usize {
    // tolerate 0.7 * 100 = 70.00000000000001 style rounding
    ((fraction * n as f64) + 1e-9).floor().min(n as f64) as usize
}

pub fn chronological_split(g: &TemporalGraph, config: &SplitConfig) -> Result<DatasetSplit, GraphError> {
    let ratios = [config.train_ratio, config.validation_ratio, config.test_ratio];
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(GraphError::Validation(format!(
            "split ratios {ratios:?} must be nonnegative and sum to 1"
        )));
    }
    if !(0.0..=1.0).contains(&config.new_node_fraction) {
        return Err(GraphError::Validation(format!(
            "new node fraction {} outside [0, 1]",
            config.new_node_fraction
        )));
    }
    let n = g.len();
    let train_end = boundary(config.train_ratio, n);
    let val_end = boundary(config.train_ratio + config.validation_ratio, n).max(train_end);
    let (train_span, validation, test) = (0..train_end, train_end..val_end, val_end..n);
    for (name, span) in [("train", &train_span), ("validation", &validation), ("test", &test)] {
        if span.is_empty() {
            return Err(GraphError::Validation(format!(
                "{name} partition is empty ({n} links)"
            )));
        }
    }

    let test_nodes: Vec<NodeId> = test
        .clone()
        .flat_map(|i| [g.link(i).src, g.link(i).dst])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let count = (config.new_node_fraction * test_nodes.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let new_nodes: BTreeSet<NodeId> = sample(&mut rng, test_nodes.len(), count)
        .into_iter()
        .map(|i| test_nodes[i])
        .collect();

    let (train, masked): (Vec<usize>, Vec<usize>) = train_span.partition(|&i| {
        let l = g.link(i);
        !new_nodes.contains(&l.src) && !new_nodes.contains(&l.dst)
    });
    if train.is_empty() {
        return Err(GraphError::Validation("train partition is empty after masking new nodes".into()));
    }
    Ok(DatasetSplit {
        train,
        validation: validation.collect(),
        test: test.collect(),
        new_nodes,
        masked,
    })
}
