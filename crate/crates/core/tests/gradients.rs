use std::time::Instant;

use ftm_core::graph::{synth_generate, SynthSpec, TemporalGraph};
use ftm_core::model::{FtmModel, ModelConfig};
use ftm_core::tensor::{finite_diff_check, ParamStore, Tape, Tensor};
use ftm_core::training::{batch_loss, BatchItem};

fn small_graph() -> TemporalGraph {
    let spec = SynthSpec {
        users: 6,
        items: 3,
        links: 48,
        feature_dim: 3,
        node_feature_dim: 5,
        seed: 11,
        ..SynthSpec::default()
    };
    synth_generate(&spec).unwrap().graph().unwrap()
}

fn batch(g: &TemporalGraph) -> Vec<BatchItem> {
    // the last few links, whose timelines reach back through the graph
    g.links()[40..]
        .iter()
        .map(|l| BatchItem {
            src: l.src,
            dst: l.dst,
            time: l.timestamp,
            negatives: vec![if l.dst == g.links()[0].dst { g.links()[1].dst } else { g.links()[0].dst }],
        })
        .collect()
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    let cfg = ModelConfig {
        layers: 2,
        heads: 2,
        frame_len: 4,
        timeline_len: 2,
        hidden_dim: 8,
        time_dim: 8,
        link_feature_dim: 3,
    };
    let g = small_graph();
    assert!(g.len() <= 50);
    let model = FtmModel::new(cfg, 4).unwrap();
    let items = batch(&g);
    let started = Instant::now();
    let report = finite_diff_check(model.params(), 1e-6, |tape: &Tape, store: &ParamStore| {
        let session = model.session_with(store, &g, tape)?;
        batch_loss(&session, &items)
    })
    .unwrap();
    assert_eq!(report.entries_checked, model.params().scalar_count());
    assert!(report.max_relative_error < 1e-3, "{report:?}");
    assert!(started.elapsed().as_secs() < 60);
}

#[test]
fn time_encoding_gradient_wrt_frequencies() {
    let cfg = ModelConfig {
        layers: 1,
        heads: 1,
        frame_len: 2,
        timeline_len: 1,
        hidden_dim: 2,
        time_dim: 6,
        link_feature_dim: 3,
    };
    let g = small_graph();
    let model = FtmModel::new(cfg, 1).unwrap();
    let report = finite_diff_check(model.params(), 1e-6, |tape: &Tape, store: &ParamStore| {
        let session = model.session_with(store, &g, tape)?;
        let phi = session.time_encode(&[0.0, 0.7, 3.2, 41.0])?;
        let weights = tape.constant(Tensor::matrix(4, 6, (0..24).map(|i| (i as f64 * 0.3).cos()).collect())?);
        Ok::<_, ftm_core::model::ModelError>(tape.sum(tape.mul(phi, weights)?)?)
    })
    .unwrap();
    assert!(report.max_relative_error < 1e-6, "{report:?}");
}
