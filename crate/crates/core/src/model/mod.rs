//! Time-aware frame attention and the linear timeline aggregator.
//!
//! For node `i` at time `t` and layer `l`:
//!
//! * every link `(i, j, t_j)` in a frame becomes the row
//!   `[h_j^{l-1}(t_j) ‖ φ(t − t_j) ‖ e_ij]`, and the target itself becomes
//!   `[h_i^{l-1}(t) ‖ φ(0) ‖ 0]`;
//! * each head attends from the target row over the link rows with scaled
//!   dot products;
//! * the target row and the head outputs go through a two-layer ReLU
//!   feed-forward, giving the frame representation;
//! * the `n` frame representations of the timeline are concatenated and
//!   mapped by one affine layer to `h_i^l(t)`.
//!
//! Layer 0 is the raw node feature (zeros when the graph has none). All
//! layers share a single parameter set.

mod config;
mod params;

use std::cell::RefCell;
use std::collections::HashMap;

pub use config::ModelConfig;
pub use params::{head_param_names, param_layout};

use crate::framing::{build_timeline, Frame};
use crate::graph::{GraphError, NodeId, TemporalGraph};
use crate::tensor::{ParamStore, Tape, Tensor, TensorError, Var};
use params::{init_params, resolve_ids, ParamIds};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("parameter `{name}` has shape {found:?}, configuration expects {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint holds {found} parameters, configuration expects {expected}")]
    ParamCount { expected: usize, found: usize },
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("link features have width {found}, model expects {expected}")]
    FeatureWidth { expected: usize, found: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Queries scored per recorded computation when evaluating.
const EVAL_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct FtmModel {
    config: ModelConfig,
    params: ParamStore,
    ids: ParamIds,
}

impl FtmModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = init_params(&config, seed);
        let ids = resolve_ids(&config, &params)?;
        Ok(Self { config, params, ids })
    }

    /// Wraps existing parameters, e.g. a loaded checkpoint.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        let ids = resolve_ids(&config, &params)?;
        Ok(Self { config, params, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParamStore) -> Result<(), ModelError> {
        self.ids = resolve_ids(&self.config, &params)?;
        self.params = params;
        Ok(())
    }

    fn check_graph(&self, graph: &TemporalGraph) -> Result<(), ModelError> {
        if !graph.is_empty() && graph.feature_dim() != self.config.link_feature_dim {
            return Err(ModelError::FeatureWidth {
                expected: self.config.link_feature_dim,
                found: graph.feature_dim(),
            });
        }
        Ok(())
    }

    /// Session recording onto `tape` with this model's parameters.
    pub fn session<'a>(&'a self, graph: &'a TemporalGraph, tape: &'a Tape) -> Result<Session<'a>, ModelError> {
        self.session_with(&self.params, graph, tape)
    }

    /// Session reading parameters from `store` instead of the model's own
    /// copy (used when probing perturbed parameters).
    pub fn session_with<'a>(
        &'a self,
        store: &'a ParamStore,
        graph: &'a TemporalGraph,
        tape: &'a Tape,
    ) -> Result<Session<'a>, ModelError> {
        self.check_graph(graph)?;
        Ok(Session {
            config: &self.config,
            ids: &self.ids,
            store,
            graph,
            tape,
            memo: RefCell::new(HashMap::new()),
            key_t: RefCell::new(HashMap::new()),
        })
    }

    /// Final-layer embeddings for `(node, time)` queries.
    pub fn embeddings(&self, graph: &TemporalGraph, queries: &[(NodeId, f64)]) -> Result<Vec<Vec<f64>>, ModelError> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(EVAL_CHUNK) {
            let tape = Tape::new();
            let session = self.session(graph, &tape)?;
            for &(node, t) in chunk {
                let h = session.embed(node, t, self.config.layers)?;
                out.push(tape.value(h).data().to_vec());
            }
        }
        Ok(out)
    }

    /// Logits `h_i(t)·h_j(t)` for `(i, j, t)` queries.
    pub fn score_links(&self, graph: &TemporalGraph, queries: &[(NodeId, NodeId, f64)]) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(EVAL_CHUNK) {
            let tape = Tape::new();
            let session = self.session(graph, &tape)?;
            for &(i, j, t) in chunk {
                let s = session.score(i, j, t)?;
                out.push(tape.scalar_value(s));
            }
        }
        Ok(out)
    }

    pub fn link_score(&self, graph: &TemporalGraph, i: NodeId, j: NodeId, t: f64) -> Result<f64, ModelError> {
        Ok(self.score_links(graph, &[(i, j, t)])?[0])
    }
}

/// Frame representation plus the `1 × entries` attention weights of each
/// head (none for an empty frame).
#[derive(Debug, Clone)]
pub struct FrameAttention {
    pub representation: Var,
    pub weights: Vec<Var>,
}

/// Model evaluation recorded onto one tape. Embeddings of the same
/// `(node, time, depth)` are computed once per session.
pub struct Session<'a> {
    config: &'a ModelConfig,
    ids: &'a ParamIds,
    store: &'a ParamStore,
    graph: &'a TemporalGraph,
    tape: &'a Tape,
    memo: RefCell<HashMap<(NodeId, u64, usize), Var>>,
    key_t: RefCell<HashMap<crate::tensor::ParamId, Var>>,
}

impl<'a> Session<'a> {
    pub fn tape(&self) -> &'a Tape {
        self.tape
    }

    pub fn graph(&self) -> &'a TemporalGraph {
        self.graph
    }

    fn param(&self, id: crate::tensor::ParamId) -> Var {
        self.tape.param(self.store, id)
    }

    fn transposed(&self, id: crate::tensor::ParamId) -> Result<Var, TensorError> {
        if let Some(&v) = self.key_t.borrow().get(&id) {
            return Ok(v);
        }
        let v = self.tape.transpose(self.param(id))?;
        self.key_t.borrow_mut().insert(id, v);
        Ok(v)
    }

    fn zeros(&self, cols: usize) -> Var {
        self.tape.constant(Tensor::zeros(&[1, cols]))
    }

    /// `√(1/d_T) · cos(ω Δt + b)` for each elapsed time, one row each.
    pub fn time_encode(&self, deltas: &[f64]) -> Result<Var, ModelError> {
        let tape = self.tape;
        let dt = tape.constant(Tensor::column(deltas.to_vec()));
        let angles = tape.matmul(dt, self.param(self.ids.frequencies))?;
        let shifted = tape.add_row(angles, self.param(self.ids.phases))?;
        let waves = tape.cos(shifted)?;
        Ok(tape.scale(waves, (1.0 / self.config.time_dim as f64).sqrt())?)
    }

    /// `[h ‖ φ(Δt) ‖ e]` as one row.
    pub fn time_aware_feature(&self, hidden: Var, delta: f64, link_features: &[f64]) -> Result<Var, ModelError> {
        let width = self.tape.value(hidden).cols();
        if width != self.config.hidden_dim || link_features.len() != self.config.link_feature_dim {
            return Err(TensorError::ShapeMismatch {
                op: "time_aware_feature",
                left: vec![self.config.hidden_dim, self.config.link_feature_dim],
                right: vec![width, link_features.len()],
            }
            .into());
        }
        let phi = self.time_encode(&[delta])?;
        let mut parts = vec![hidden, phi];
        if !link_features.is_empty() {
            parts.push(self.tape.constant(Tensor::row(link_features.to_vec())));
        }
        Ok(self.tape.concat_cols(&parts)?)
    }

    /// Frame representation from the target's previous-layer embedding and
    /// one previous-layer embedding per frame entry. An empty frame yields
    /// the zero vector.
    pub fn frame_embed(&self, frame: &Frame, neighbors: &[Var], target: Var) -> Result<FrameAttention, ModelError> {
        let tape = self.tape;
        let cfg = self.config;
        if frame.is_empty() {
            return Ok(FrameAttention {
                representation: self.zeros(cfg.hidden_dim),
                weights: Vec::new(),
            });
        }
        if neighbors.len() != frame.len() {
            return Err(TensorError::ShapeMismatch {
                op: "frame_embed",
                left: vec![frame.len()],
                right: vec![neighbors.len()],
            }
            .into());
        }
        let target_row = self.time_aware_feature(target, 0.0, &vec![0.0; cfg.link_feature_dim])?;

        let hidden = tape.concat_rows(neighbors)?;
        let deltas: Vec<f64> = frame.entries.iter().map(|e| frame.ref_time - e.timestamp).collect();
        let phi = self.time_encode(&deltas)?;
        let mut parts = vec![hidden, phi];
        if cfg.link_feature_dim > 0 {
            let mut feats = Vec::with_capacity(frame.len() * cfg.link_feature_dim);
            for e in &frame.entries {
                feats.extend_from_slice(&self.graph.link(e.link_index).features);
            }
            parts.push(tape.constant(Tensor::matrix(frame.len(), cfg.link_feature_dim, feats)?));
        }
        let rows = tape.concat_cols(&parts)?;

        // q·(Z W_K)ᵀ is computed as (q W_Kᵀ)·Zᵀ and α·(Z W_V) as (α Z)·W_V,
        // so the frame rows are never projected one by one.
        let scale = 1.0 / (cfg.head_dim() as f64).sqrt();
        let rows_t = tape.transpose(rows)?;
        let mut y_parts = vec![target_row];
        let mut weights = Vec::with_capacity(cfg.heads);
        for head in &self.ids.heads {
            let q = tape.matmul(target_row, self.param(head.query))?;
            let q_in_rows = tape.matmul(q, self.transposed(head.key)?)?;
            let logits = tape.scale(tape.matmul(q_in_rows, rows_t)?, scale)?;
            let alpha = tape.softmax_rows(logits)?;
            let mixed = tape.matmul(alpha, rows)?;
            y_parts.push(tape.matmul(mixed, self.param(head.value))?);
            weights.push(alpha);
        }
        let y = tape.concat_cols(&y_parts)?;
        let hidden = tape.relu(tape.add_row(tape.matmul(y, self.param(self.ids.w0))?, self.param(self.ids.b0))?)?;
        let out = tape.add_row(tape.matmul(hidden, self.param(self.ids.w1))?, self.param(self.ids.b1))?;
        Ok(FrameAttention {
            representation: out,
            weights,
        })
    }

    fn raw_embedding(&self, node: NodeId) -> Var {
        let dh = self.config.hidden_dim;
        let mut h = vec![0.0; dh];
        if let Some(f) = self.graph.node_feature(node) {
            let n = f.len().min(dh);
            h[..n].copy_from_slice(&f[..n]);
        }
        self.tape.constant(Tensor::row(h))
    }

    /// `h_node^depth(t)`; `1 × hidden_dim`.
    pub fn embed(&self, node: NodeId, t: f64, depth: usize) -> Result<Var, ModelError> {
        let key = (node, t.to_bits(), depth);
        if let Some(&v) = self.memo.borrow().get(&key) {
            return Ok(v);
        }
        let h = if depth == 0 {
            self.graph.adjacency(node)?;
            self.raw_embedding(node)
        } else {
            let cfg = self.config;
            let timeline = build_timeline(self.graph, node, t, cfg.frame_len, cfg.timeline_len)?;
            let mut reps = Vec::with_capacity(cfg.timeline_len);
            for slot in timeline.slots() {
                let rep = match slot {
                    None => self.zeros(cfg.hidden_dim),
                    Some(frame) => {
                        let target = self.embed(node, frame.ref_time, depth - 1)?;
                        let neighbors = frame
                            .entries
                            .iter()
                            .map(|e| self.embed(e.neighbor, e.timestamp, depth - 1))
                            .collect::<Result<Vec<_>, _>>()?;
                        self.frame_embed(frame, &neighbors, target)?.representation
                    }
                };
                reps.push(rep);
            }
            let joined = self.tape.concat_cols(&reps)?;
            let mapped = self.tape.matmul(joined, self.param(self.ids.w2))?;
            self.tape.add_row(mapped, self.param(self.ids.b2))?
        };
        self.memo.borrow_mut().insert(key, h);
        Ok(h)
    }

    /// Final-layer embedding.
    pub fn node_embedding(&self, node: NodeId, t: f64) -> Result<Var, ModelError> {
        self.embed(node, t, self.config.layers)
    }

    /// Inner product of the final-layer embeddings; `1 × 1`.
    pub fn score(&self, i: NodeId, j: NodeId, t: f64) -> Result<Var, ModelError> {
        let hi = self.node_embedding(i, t)?;
        let hj = self.node_embedding(j, t)?;
        Ok(self.tape.sum(self.tape.mul(hi, hj)?)?)
    }
}
