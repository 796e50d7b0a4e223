use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError};
use crate::tensor::{ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HeadIds {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

/// Handles of every learnable array. One copy serves all layers.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamIds {
    pub frequencies: ParamId,
    pub phases: ParamId,
    pub heads: Vec<HeadIds>,
    pub w0: ParamId,
    pub b0: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

pub fn head_param_names(head: usize) -> [String; 3] {
    [
        format!("attn.head{head}.query"),
        format!("attn.head{head}.key"),
        format!("attn.head{head}.value"),
    ]
}

/// Expected `(name, shape)` of every parameter, in store order.
pub fn param_layout(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (dh, dt) = (config.hidden_dim, config.time_dim);
    let mut layout = vec![
        ("time.frequencies".to_string(), vec![dt]),
        ("time.phases".to_string(), vec![dt]),
    ];
    for h in 0..config.heads {
        for name in head_param_names(h) {
            layout.push((name, vec![config.row_dim(), config.head_dim()]));
        }
    }
    layout.extend([
        ("ffn.w0".to_string(), vec![config.ffn_input_dim(), dh]),
        ("ffn.b0".to_string(), vec![dh]),
        ("ffn.w1".to_string(), vec![dh, dh]),
        ("ffn.b1".to_string(), vec![dh]),
        ("timeline.w2".to_string(), vec![config.timeline_len * dh, dh]),
        ("timeline.b2".to_string(), vec![dh]),
    ]);
    layout
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect()
}

pub(crate) fn init_params(config: &ModelConfig, seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = config.time_dim;
    let mut store = ParamStore::new();
    for (name, shape) in param_layout(config) {
        let tensor = match name.as_str() {
            "time.frequencies" => {
                let freqs = (0..dt)
                    .map(|m| 1.0 / 10f64.powf(m as f64 * 9.0 / dt as f64))
                    .collect();
                Tensor::new(shape, freqs).unwrap()
            }
            _ if shape.len() == 1 => Tensor::zeros(&shape),
            _ => {
                let values = xavier(&mut rng, shape[0], shape[1]);
                Tensor::new(shape, values).unwrap()
            }
        };
        store.insert(name, tensor).expect("layout names are unique");
    }
    store
}

/// Resolves handles, checking every expected parameter is present with the
/// expected shape.
pub(crate) fn resolve_ids(config: &ModelConfig, store: &ParamStore) -> Result<ParamIds, ModelError> {
    let layout = param_layout(config);
    if store.len() != layout.len() {
        return Err(ModelError::ParamCount {
            expected: layout.len(),
            found: store.len(),
        });
    }
    for (name, shape) in &layout {
        let id = store.id(name).ok_or_else(|| ModelError::MissingParam(name.clone()))?;
        if store.get(id).shape() != shape.as_slice() {
            return Err(ModelError::ParamShape {
                name: name.clone(),
                expected: shape.clone(),
                found: store.get(id).shape().to_vec(),
            });
        }
    }
    let id = |n: &str| store.id(n).expect("checked above");
    Ok(ParamIds {
        frequencies: id("time.frequencies"),
        phases: id("time.phases"),
        heads: (0..config.heads)
            .map(|h| {
                let [q, k, v] = head_param_names(h);
                HeadIds {
                    query: id(&q),
                    key: id(&k),
                    value: id(&v),
                }
            })
            .collect(),
        w0: id("ffn.w0"),
        b0: id("ffn.b0"),
        w1: id("ffn.w1"),
        b1: id("ffn.b1"),
        w2: id("timeline.w2"),
        b2: id("timeline.b2"),
    })
}
