//! Desk-scale synthetic interaction streams.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Serialize;

use super::{write_csv, write_node_features, GraphError, IdSpace, RawLink, TemporalGraph};

/// Parameters of the "periodic-bipartite" family: users `0..users` interact
/// with items `users..users+items`. Each user has one preferred item chosen
/// with probability `preference`, otherwise a different item uniformly.
/// Gaps between consecutive interactions are exponential.
///
/// Every user also carries a binary state that is the link label; at each of
/// the user's interactions it is redrawn with probability `label_switch`.
/// Links made in the positive state get their features shifted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    pub links: usize,
    pub feature_dim: usize,
    /// Width of the random identity vector attached to every node (0: none).
    pub node_feature_dim: usize,
    pub preference: f64,
    pub mean_gap: f64,
    /// Probability of the positive state on every (re)draw.
    pub positive_fraction: f64,
    /// Per-interaction probability that a user's state is redrawn.
    pub label_switch: f64,
    /// Shift added to the link features of positive users.
    pub label_signal: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            users: 20,
            items: 5,
            links: 2000,
            feature_dim: 8,
            node_feature_dim: 16,
            preference: 0.9,
            mean_gap: 1.0,
            positive_fraction: 0.3,
            label_switch: 0.05,
            label_signal: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthTruth {
    /// user raw id → preferred item raw id
    pub preferred: BTreeMap<u64, u64>,
    /// user raw id → state before the first interaction
    pub initial_state: BTreeMap<u64, bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    pub rows: Vec<RawLink>,
    pub node_features: Vec<(u64, Vec<f64>)>,
    pub truth: SynthTruth,
}

impl SynthDataset {
    pub fn graph(&self) -> Result<TemporalGraph, GraphError> {
        let g = TemporalGraph::from_raw(self.rows.clone(), IdSpace::Shared)?;
        if self.node_features.is_empty() {
            Ok(g)
        } else {
            g.with_node_features(&self.node_features)
        }
    }

    pub fn write_links(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        write_csv(path, &self.rows)
    }

    pub fn write_node_features(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        write_node_features(path, &self.node_features)
    }

    pub fn truth_json(&self) -> String {
        serde_json::to_string_pretty(&self.truth).expect("truth serializes")
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthDataset, GraphError> {
    if spec.users == 0 || spec.items == 0 {
        return Err(GraphError::Validation(format!(
            "synthetic spec needs users and items, got {} and {}",
            spec.users, spec.items
        )));
    }
    if spec.links == 0 {
        return Err(GraphError::Validation("synthetic spec needs at least one link".into()));
    }
    if [spec.preference, spec.positive_fraction, spec.label_switch]
        .iter()
        .any(|p| !(0.0..=1.0).contains(p))
    {
        return Err(GraphError::Validation("probabilities must lie in [0, 1]".into()));
    }
    let gaps = Exp::new(1.0 / spec.mean_gap)
        .map_err(|_| GraphError::Validation(format!("mean gap {} must be positive", spec.mean_gap)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let users = spec.users as u64;
    let items = spec.items as u64;

    let preferred: BTreeMap<u64, u64> = (0..users).map(|u| (u, users + u % items)).collect();
    let initial_state: BTreeMap<u64, bool> = (0..users)
        .map(|u| (u, rng.random_bool(spec.positive_fraction)))
        .collect();
    let mut state = initial_state.clone();
    let node_features: Vec<(u64, Vec<f64>)> = if spec.node_feature_dim == 0 {
        Vec::new()
    } else {
        (0..users + items)
            .map(|n| {
                let v = (0..spec.node_feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                (n, v)
            })
            .collect()
    };
    let shift = if spec.feature_dim == 0 {
        0.0
    } else {
        spec.label_signal / (spec.feature_dim as f64).sqrt()
    };

    let mut t = 0.0;
    let mut rows = Vec::with_capacity(spec.links);
    for _ in 0..spec.links {
        t += gaps.sample(&mut rng);
        let user = rng.random_range(0..users);
        let favourite = preferred[&user];
        let item = if items == 1 || rng.random_bool(spec.preference) {
            favourite
        } else {
            let k = rng.random_range(0..items - 1);
            let candidate = users + k;
            if candidate >= favourite {
                candidate + 1
            } else {
                candidate
            }
        };
        if rng.random_bool(spec.label_switch) {
            state.insert(user, rng.random_bool(spec.positive_fraction));
        }
        let positive = state[&user];
        let features = (0..spec.feature_dim)
            .map(|_| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                noise + if positive { shift } else { 0.0 }
            })
            .collect();
        rows.push(RawLink {
            src: user,
            dst: item,
            timestamp: t,
            label: Some(positive),
            features,
        });
    }
    Ok(SynthDataset {
        spec: spec.clone(),
        rows,
        node_features,
        truth: SynthTruth {
            preferred,
            initial_state,
        },
    })
}
