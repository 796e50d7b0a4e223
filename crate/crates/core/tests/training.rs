mod support;

use ftm_core::graph::{chronological_split, synth_generate, IdSpace, RawLink, SplitConfig, SynthSpec, TemporalGraph};
use ftm_core::model::{FtmModel, ModelConfig};
use ftm_core::tensor::{Adam, Tape};
use ftm_core::training::{
    batch_loss, contrastive_loss, destination_universe, fit, make_batches, sample_negatives, train_epoch, BatchItem,
    TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_config(d_e: usize) -> ModelConfig {
    ModelConfig {
        layers: 1,
        heads: 1,
        frame_len: 4,
        timeline_len: 2,
        hidden_dim: 4,
        time_dim: 4,
        link_feature_dim: d_e,
    }
}

fn data(links: usize) -> TemporalGraph {
    let spec = SynthSpec {
        users: 8,
        items: 4,
        links,
        feature_dim: 2,
        node_feature_dim: 4,
        ..SynthSpec::default()
    };
    synth_generate(&spec).unwrap().graph().unwrap()
}

#[test]
fn zero_scores_give_ln2_per_term() {
    let g = data(30);
    let mut model = FtmModel::new(tiny_config(2), 1).unwrap();
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        model.params_mut().get_mut(id).data_mut().fill(0.0);
    }
    for q in 1..=3 {
        let items: Vec<BatchItem> = g.links()[10..20]
            .iter()
            .map(|l| BatchItem {
                src: l.src,
                dst: l.dst,
                time: l.timestamp,
                negatives: vec![l.src; q],
            })
            .collect();
        let tape = Tape::new();
        let s = model.session(&g, &tape).unwrap();
        let loss = tape.scalar_value(batch_loss(&s, &items).unwrap());
        assert!((loss - (1 + q) as f64 * std::f64::consts::LN_2).abs() < 1e-12);
    }
}

#[test]
fn batch_loss_matches_scalar_oracle() {
    // two nodes, one link each way
    let rows = vec![
        RawLink {
            src: 0,
            dst: 1,
            timestamp: 1.0,
            label: None,
            features: vec![0.2, -0.4],
        },
        RawLink {
            src: 1,
            dst: 0,
            timestamp: 2.0,
            label: None,
            features: vec![0.7, 0.1],
        },
    ];
    let g = TemporalGraph::from_raw(rows, IdSpace::Shared)
        .unwrap()
        .with_node_features(&[(0, vec![1.0, 0.5, -0.3, 0.2]), (1, vec![-0.6, 0.9, 0.4, 0.0])])
        .unwrap();
    let model = FtmModel::new(tiny_config(2), 3).unwrap();
    let items = vec![
        BatchItem {
            src: 0,
            dst: 1,
            time: 3.0,
            negatives: vec![0],
        },
        BatchItem {
            src: 1,
            dst: 0,
            time: 2.5,
            negatives: vec![1, 1],
        },
    ];
    let score = |i, j, t| model.link_score(&g, i, j, t).unwrap();
    let want = (support::loss_oracle(score(0, 1, 3.0), &[score(0, 0, 3.0)])
        + support::loss_oracle(score(1, 0, 2.5), &[score(1, 1, 2.5), score(1, 1, 2.5)]))
        / 2.0;
    let tape = Tape::new();
    let s = model.session(&g, &tape).unwrap();
    let got = tape.scalar_value(batch_loss(&s, &items).unwrap());
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    assert!((contrastive_loss(score(0, 1, 3.0), &[score(0, 0, 3.0)]) - support::loss_oracle(score(0, 1, 3.0), &[score(0, 0, 3.0)])).abs() < 1e-12);
}

#[test]
fn no_negatives_leaves_only_the_positive_term() {
    let g = data(30);
    let model = FtmModel::new(tiny_config(2), 2).unwrap();
    let l = &g.links()[25];
    let item = BatchItem {
        src: l.src,
        dst: l.dst,
        time: l.timestamp,
        negatives: vec![],
    };
    let tape = Tape::new();
    let s = model.session(&g, &tape).unwrap();
    let got = tape.scalar_value(batch_loss(&s, &[item]).unwrap());
    let pos = model.link_score(&g, l.src, l.dst, l.timestamp).unwrap();
    assert_eq!(got, contrastive_loss(pos, &[]));
}

#[test]
fn negatives_are_uniform() {
    let universe: Vec<usize> = (0..10).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut counts = [0usize; 10];
    let draws = 100_000;
    for q in sample_negatives(&mut rng, &universe, 99, draws).unwrap() {
        counts[q] += 1;
    }
    let p = 0.1;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
    }
    // 9 degrees of freedom; 27.88 is the 0.999 quantile
    let expected = draws as f64 * p;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 27.88, "chi2 {chi2}");
}

#[test]
fn batches_are_chronological() {
    let g = data(97);
    let universe = destination_universe(&g, &(0..g.len()).collect::<Vec<_>>());
    let cfg = TrainConfig {
        batch_size: 10,
        ..TrainConfig::default()
    };
    let batches = make_batches(&g, &universe, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(batches.len(), 10);
    for pair in batches.windows(2) {
        let latest = pair[0].iter().map(|b| b.time).fold(f64::MIN, f64::max);
        let earliest = pair[1].iter().map(|b| b.time).fold(f64::MAX, f64::min);
        assert!(latest <= earliest);
    }
    for b in batches.iter().flatten() {
        assert!(b.negatives.iter().all(|&q| q != b.dst));
    }
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let g = data(60);
    let universe = destination_universe(&g, &(0..g.len()).collect::<Vec<_>>());
    let mut model = FtmModel::new(tiny_config(2), 6).unwrap();
    let before = model.params().clone();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let mut adam = Adam::new(model.params(), 0.0);
    let mut losses = Vec::new();
    for _ in 0..2 {
        // same negatives each epoch so the loss can be compared
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        losses.push(train_epoch(&mut model, &mut adam, &g, &universe, &cfg, &mut rng).unwrap().mean_loss);
    }
    assert_eq!(model.params(), &before);
    assert_eq!(losses[0], losses[1]);
}

fn run_fit(cfg: &TrainConfig) -> (Vec<u8>, ftm_core::training::FitReport, FtmModel) {
    let g = data(120);
    let split = chronological_split(&g, &SplitConfig::default()).unwrap();
    let mut model = FtmModel::new(tiny_config(2), 7).unwrap();
    let mut log = Vec::new();
    let report = fit(&mut model, &g, &split, cfg, &mut log).unwrap();
    (log, report, model)
}

#[test]
fn fixed_seed_gives_identical_logs() {
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 12,
        learning_rate: 1e-2,
        seed: 4,
        ..TrainConfig::default()
    };
    let (a, ra, _) = run_fit(&cfg);
    let (b, rb, _) = run_fit(&cfg);
    assert_eq!(a, b);
    assert_eq!(ra.best_params, rb.best_params);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("{\"epoch\":") && !l.contains("seconds")));
}

#[test]
fn zero_epochs_return_initial_parameters() {
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let (log, report, model) = run_fit(&cfg);
    assert!(log.is_empty());
    assert_eq!(report.best_epoch, None);
    assert_eq!(model.params(), FtmModel::new(tiny_config(2), 7).unwrap().params());
}

#[test]
fn patience_zero_stops_one_epoch_after_the_best() {
    let cfg = TrainConfig {
        epochs: 30,
        patience: 0,
        batch_size: 12,
        learning_rate: 5e-2,
        ..TrainConfig::default()
    };
    let (_, report, model) = run_fit(&cfg);
    let best = report.best_epoch.unwrap();
    // every epoch before the stop improved on the previous best
    assert!(report.history.len() == best + 1 || report.history.len() == cfg.epochs);
    assert_eq!(model.params(), &report.best_params);
    let aps: Vec<f64> = report.history.iter().map(|r| r.val_ap).collect();
    for w in aps[..best].windows(2) {
        assert!(w[1] > w[0]);
    }
}

