//! Plain-`Vec` reference computations used to cross-check the tape-based
//! model. Nothing here touches `Tape`.
#![allow(dead_code)]

use ftm_core::framing::oracle::oracle_timeline;
use ftm_core::graph::TemporalGraph;
use ftm_core::model::ModelConfig;
use ftm_core::tensor::ParamStore;

pub type Mat = Vec<Vec<f64>>;

pub struct PlainParams {
    pub freq: Vec<f64>,
    pub phase: Vec<f64>,
    pub heads: Vec<(Mat, Mat, Mat)>,
    pub w0: Mat,
    pub b0: Vec<f64>,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

fn grab(store: &ParamStore, name: &str) -> Vec<f64> {
    store.get(store.id(name).unwrap()).data().to_vec()
}

fn grab_mat(store: &ParamStore, name: &str) -> Mat {
    let t = store.get(store.id(name).unwrap());
    let cols = t.shape()[1];
    t.data().chunks(cols).map(|r| r.to_vec()).collect()
}

impl PlainParams {
    pub fn from_store(store: &ParamStore, heads: usize) -> Self {
        PlainParams {
            freq: grab(store, "time.frequencies"),
            phase: grab(store, "time.phases"),
            heads: (0..heads)
                .map(|h| {
                    (
                        grab_mat(store, &format!("attn.head{h}.query")),
                        grab_mat(store, &format!("attn.head{h}.key")),
                        grab_mat(store, &format!("attn.head{h}.value")),
                    )
                })
                .collect(),
            w0: grab_mat(store, "ffn.w0"),
            b0: grab(store, "ffn.b0"),
            w1: grab_mat(store, "ffn.w1"),
            b1: grab(store, "ffn.b1"),
            w2: grab_mat(store, "timeline.w2"),
            b2: grab(store, "timeline.b2"),
        }
    }
}

/// Row vector times matrix.
pub fn vecmat(x: &[f64], w: &Mat) -> Vec<f64> {
    assert_eq!(x.len(), w.len());
    let mut out = vec![0.0; w[0].len()];
    for (xi, row) in x.iter().zip(w) {
        for (o, wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn time_encoding(p: &PlainParams, dt: f64) -> Vec<f64> {
    let s = (1.0 / p.freq.len() as f64).sqrt();
    p.freq.iter().zip(&p.phase).map(|(w, b)| s * (w * dt + b).cos()).collect()
}

/// One neighbor row: previous-layer embedding, elapsed time, link features.
pub struct Neighbor {
    pub hidden: Vec<f64>,
    pub dt: f64,
    pub features: Vec<f64>,
}

/// Frame representation and per-head attention weights, computed row by
/// row: project every row, softmax of scaled dot products, weighted sum,
/// then the feed-forward.
pub fn frame_oracle(p: &PlainParams, target: &[f64], neighbors: &[Neighbor], d_e: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dh = target.len();
    if neighbors.is_empty() {
        return (vec![0.0; dh], vec![]);
    }
    let mut z0 = target.to_vec();
    z0.extend(time_encoding(p, 0.0));
    z0.extend(std::iter::repeat_n(0.0, d_e));
    let rows: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|n| {
            let mut r = n.hidden.clone();
            r.extend(time_encoding(p, n.dt));
            r.extend(n.features.iter().copied());
            r
        })
        .collect();

    let mut y = z0.clone();
    let mut alphas = Vec::new();
    for (wq, wk, wv) in &p.heads {
        let q = vecmat(&z0, wq);
        let scale = 1.0 / (q.len() as f64).sqrt();
        let logits: Vec<f64> = rows.iter().map(|r| dot(&q, &vecmat(r, wk)) * scale).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let alpha: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let mut head = vec![0.0; q.len()];
        for (a, r) in alpha.iter().zip(&rows) {
            for (h, v) in head.iter_mut().zip(vecmat(r, wv)) {
                *h += a * v;
            }
        }
        y.extend(head);
        alphas.push(alpha);
    }
    let hidden: Vec<f64> = vecmat(&y, &p.w0)
        .iter()
        .zip(&p.b0)
        .map(|(v, b)| (v + b).max(0.0))
        .collect();
    let out = vecmat(&hidden, &p.w1).iter().zip(&p.b1).map(|(v, b)| v + b).collect();
    (out, alphas)
}

fn raw_feature(g: &TemporalGraph, node: usize, dh: usize) -> Vec<f64> {
    let mut h = vec![0.0; dh];
    if let Some(f) = g.node_feature(node) {
        for (slot, v) in h.iter_mut().zip(f) {
            *slot = *v;
        }
    }
    h
}

/// Full recursion without any caching, timelines from the scan-based
/// reference.
pub fn embed_oracle(p: &PlainParams, cfg: &ModelConfig, g: &TemporalGraph, node: usize, t: f64, depth: usize) -> Vec<f64> {
    let dh = cfg.hidden_dim;
    if depth == 0 {
        return raw_feature(g, node, dh);
    }
    let timeline = oracle_timeline(g, node, t, cfg.frame_len, cfg.timeline_len);
    let missing = cfg.timeline_len - timeline.frames.len();
    let mut joined = vec![0.0; missing * dh];
    for frame in &timeline.frames {
        let target = embed_oracle(p, cfg, g, node, frame.ref_time, depth - 1);
        let neighbors: Vec<Neighbor> = frame
            .entries
            .iter()
            .map(|e| Neighbor {
                hidden: embed_oracle(p, cfg, g, e.neighbor, e.timestamp, depth - 1),
                dt: frame.ref_time - e.timestamp,
                features: g.link(e.link_index).features.clone(),
            })
            .collect();
        joined.extend(frame_oracle(p, &target, &neighbors, cfg.link_feature_dim).0);
    }
    vecmat(&joined, &p.w2).iter().zip(&p.b2).map(|(v, b)| v + b).collect()
}

/// `ln(1 + e^{-pos}) + Σ ln(1 + e^{neg})`, written out directly.
pub fn loss_oracle(pos: f64, negs: &[f64]) -> f64 {
    (1.0 + (-pos).exp()).ln() + negs.iter().map(|s| (1.0 + s.exp()).ln()).sum::<f64>()
}
