//! Immutable temporal edge store with per-node chronological adjacency.

mod io;
mod noise;
mod split;
mod synth;

use std::collections::HashMap;

use serde::Serialize;

pub use io::{load_csv, load_node_features, write_csv, write_node_features, LoadOptions};
pub use noise::inject_noise;
pub use split::{chronological_split, DatasetSplit, SplitConfig, SplitManifest};
pub use synth::{synth_generate, SynthDataset, SynthSpec};

/// Dense node index in `0..node_count`.
pub type NodeId = usize;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// How raw ids in the `src` and `dst` columns are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IdSpace {
    /// One namespace for both columns.
    #[default]
    Shared,
    /// `src` and `dst` number their nodes independently (user/item files).
    Bipartite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Any,
    Source,
    Destination,
}

/// Original identity of a dense node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct NodeKey {
    pub raw: u64,
    pub role: NodeRole,
}

/// One row as read from disk, before remapping and sorting.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLink {
    pub src: u64,
    pub dst: u64,
    pub timestamp: f64,
    pub label: Option<bool>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalLink {
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: f64,
    pub features: Vec<f64>,
    pub label: Option<bool>,
    /// Position in the global chronological order.
    pub link_index: usize,
}

impl TemporalLink {
    /// The endpoint opposite `node`.
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.src == node {
            self.dst
        } else {
            self.src
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.src == node || self.dst == node
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    links: Vec<TemporalLink>,
    /// Per node, indices into `links` in ascending (timestamp, link_index).
    adjacency: Vec<Vec<usize>>,
    keys: Vec<NodeKey>,
    lookup: HashMap<NodeKey, NodeId>,
    node_features: Option<Vec<Vec<f64>>>,
    feature_dim: usize,
}

fn validate_raw(raw: &RawLink, row: usize, feature_dim: usize) -> Result<(), GraphError> {
    if !raw.timestamp.is_finite() || raw.timestamp < 0.0 {
        return Err(GraphError::Validation(format!(
            "row {row}: timestamp {} must be a nonnegative number",
            raw.timestamp
        )));
    }
    if raw.features.len() != feature_dim {
        return Err(GraphError::Validation(format!(
            "row {row}: {} link features, expected {feature_dim}",
            raw.features.len()
        )));
    }
    Ok(())
}

impl TemporalGraph {
    /// Builds a graph from raw rows. Rows are stably sorted by timestamp and
    /// node ids are assigned by first appearance in input order.
    pub fn from_raw(raw: Vec<RawLink>, id_space: IdSpace) -> Result<Self, GraphError> {
        let feature_dim = raw.first().map_or(0, |r| r.features.len());
        for (row, r) in raw.iter().enumerate() {
            validate_raw(r, row, feature_dim)?;
        }
        let mut keys = Vec::new();
        let mut lookup = HashMap::new();
        let mut intern = |key: NodeKey| -> NodeId {
            *lookup.entry(key).or_insert_with(|| {
                keys.push(key);
                keys.len() - 1
            })
        };
        let (src_role, dst_role) = match id_space {
            IdSpace::Shared => (NodeRole::Any, NodeRole::Any),
            IdSpace::Bipartite => (NodeRole::Source, NodeRole::Destination),
        };
        let mut staged: Vec<TemporalLink> = raw
            .into_iter()
            .map(|r| TemporalLink {
                src: intern(NodeKey { raw: r.src, role: src_role }),
                dst: intern(NodeKey { raw: r.dst, role: dst_role }),
                timestamp: r.timestamp,
                features: r.features,
                label: r.label,
                link_index: 0,
            })
            .collect();
        staged.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Self::assemble(staged, keys, lookup, None, feature_dim))
    }

    fn assemble(
        mut links: Vec<TemporalLink>,
        keys: Vec<NodeKey>,
        lookup: HashMap<NodeKey, NodeId>,
        node_features: Option<Vec<Vec<f64>>>,
        feature_dim: usize,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); keys.len()];
        for (i, link) in links.iter_mut().enumerate() {
            link.link_index = i;
            adjacency[link.src].push(i);
            if link.dst != link.src {
                adjacency[link.dst].push(i);
            }
        }
        Self {
            links,
            adjacency,
            keys,
            lookup,
            node_features,
            feature_dim,
        }
    }

    /// Attaches per-node features keyed by original id. Nodes without an
    /// entry get zeros.
    pub fn with_node_features(mut self, features: &[(u64, Vec<f64>)]) -> Result<Self, GraphError> {
        let dim = features.first().map_or(0, |(_, f)| f.len());
        let mut table = vec![vec![0.0; dim]; self.keys.len()];
        for (raw, f) in features {
            if f.len() != dim {
                return Err(GraphError::Validation(format!(
                    "node {raw}: {} features, expected {dim}",
                    f.len()
                )));
            }
            let node = self
                .lookup
                .get(&NodeKey { raw: *raw, role: NodeRole::Any })
                .copied();
            if let Some(node) = node {
                table[node] = f.clone();
            } else if self.keys.iter().any(|k| k.role != NodeRole::Any) {
                return Err(GraphError::Validation(
                    "node features need a shared id space".into(),
                ));
            }
        }
        self.node_features = Some(table);
        Ok(self)
    }

    pub fn links(&self) -> &[TemporalLink] {
        &self.links
    }

    pub fn link(&self, index: usize) -> &TemporalLink {
        &self.links[index]
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.keys.len()
    }

    /// Link feature width d_e.
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn node_feature_dim(&self) -> Option<usize> {
        self.node_features.as_ref().map(|t| t.first().map_or(0, Vec::len))
    }

    pub fn node_feature(&self, node: NodeId) -> Option<&[f64]> {
        self.node_features.as_ref().map(|t| t[node].as_slice())
    }

    pub fn key(&self, node: NodeId) -> NodeKey {
        self.keys[node]
    }

    pub fn node_by_key(&self, key: NodeKey) -> Option<NodeId> {
        self.lookup.get(&key).copied()
    }

    /// Dense id of a raw id, trying the shared namespace, then source, then
    /// destination.
    pub fn node_by_raw(&self, raw: u64) -> Option<NodeId> {
        [NodeRole::Any, NodeRole::Source, NodeRole::Destination]
            .into_iter()
            .find_map(|role| self.node_by_key(NodeKey { raw, role }))
    }

    fn check_node(&self, node: NodeId) -> Result<(), GraphError> {
        if node < self.keys.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(node))
        }
    }

    /// Link indices incident to `node`, oldest first.
    pub fn adjacency(&self, node: NodeId) -> Result<&[usize], GraphError> {
        self.check_node(node)?;
        Ok(&self.adjacency[node])
    }

    /// Indices of links incident to `node` with timestamp strictly below `t`,
    /// oldest first.
    pub fn history_before(&self, node: NodeId, t: f64) -> Result<&[usize], GraphError> {
        let adj = self.adjacency(node)?;
        let end = adj.partition_point(|&i| self.links[i].timestamp < t);
        Ok(&adj[..end])
    }

    /// All links incident to `node` with timestamp strictly below `t`, most
    /// recent first (ties: higher link index first), truncated to `limit`.
    pub fn neighbors_before(
        &self,
        node: NodeId,
        t: f64,
        limit: Option<usize>,
    ) -> Result<Vec<&TemporalLink>, GraphError> {
        let history = self.history_before(node, t)?;
        let take = limit.map_or(history.len(), |l| l.min(history.len()));
        Ok(history.iter().rev().take(take).map(|&i| &self.links[i]).collect())
    }

    /// Graph holding only the given links; node ids, keys and node features
    /// are preserved.
    pub fn subgraph(&self, link_indices: &[usize]) -> Self {
        let mut picked: Vec<usize> = link_indices.to_vec();
        picked.sort_unstable();
        picked.dedup();
        let links = picked.into_iter().map(|i| self.links[i].clone()).collect();
        Self::assemble(
            links,
            self.keys.clone(),
            self.lookup.clone(),
            self.node_features.clone(),
            self.feature_dim,
        )
    }

    /// Returns a copy with one more link. Existing node ids are kept; unseen
    /// endpoints get fresh ids. Among equal timestamps the new link sorts last.
    pub fn insert_link(&self, raw: RawLink, id_space: IdSpace) -> Result<Self, GraphError> {
        validate_raw(&raw, self.links.len(), self.feature_dim)?;
        let mut keys = self.keys.clone();
        let mut lookup = self.lookup.clone();
        let mut intern = |key: NodeKey| -> NodeId {
            *lookup.entry(key).or_insert_with(|| {
                keys.push(key);
                keys.len() - 1
            })
        };
        let (src_role, dst_role) = match id_space {
            IdSpace::Shared => (NodeRole::Any, NodeRole::Any),
            IdSpace::Bipartite => (NodeRole::Source, NodeRole::Destination),
        };
        let link = TemporalLink {
            src: intern(NodeKey { raw: raw.src, role: src_role }),
            dst: intern(NodeKey { raw: raw.dst, role: dst_role }),
            timestamp: raw.timestamp,
            features: raw.features,
            label: raw.label,
            link_index: 0,
        };
        let mut links = self.links.clone();
        let at = links.partition_point(|l| l.timestamp <= link.timestamp);
        links.insert(at, link);
        let node_features = self.node_features.as_ref().map(|table| {
            let dim = table.first().map_or(0, Vec::len);
            let mut t = table.clone();
            t.resize(keys.len(), vec![0.0; dim]);
            t
        });
        Ok(Self::assemble(links, keys, lookup, node_features, self.feature_dim))
    }

    /// Copy with every link's features replaced by `f(link)`.
    pub fn map_link_features(&self, mut f: impl FnMut(&TemporalLink) -> Vec<f64>) -> Self {
        let mut out = self.clone();
        for link in out.links.iter_mut() {
            link.features = f(link);
        }
        out.feature_dim = out.links.first().map_or(self.feature_dim, |l| l.features.len());
        out
    }

    /// Copy with link features zero-padded or truncated to `dim`.
    pub fn with_feature_dim(&self, dim: usize) -> Self {
        self.map_link_features(|l| {
            let mut f = l.features.clone();
            f.resize(dim, 0.0);
            f
        })
    }

    /// Raw rows in chronological order, using original ids.
    pub fn to_raw(&self) -> Vec<RawLink> {
        self.links
            .iter()
            .map(|l| RawLink {
                src: self.keys[l.src].raw,
                dst: self.keys[l.dst].raw,
                timestamp: l.timestamp,
                label: l.label,
                features: l.features.clone(),
            })
            .collect()
    }

    /// Nodes touched by at least one link.
    pub fn active_nodes(&self) -> Vec<NodeId> {
        (0..self.node_count()).filter(|&n| !self.adjacency[n].is_empty()).collect()
    }
}
