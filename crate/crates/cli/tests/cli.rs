use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use ftm_core::graph::{load_csv, LoadOptions};
use serde_json::Value;

fn ftm(dir: &Path, args: &[&str]) -> Output {
    ftm_env(dir, args, &[])
}

fn ftm_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ftm"));
    cmd.current_dir(dir).args(args).env_remove("FTM_SEED").env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = "\
dataset = data/s.csv
node_features = data/s.nodes.csv
output = out
synth.users = 10
synth.items = 4
synth.links = 300
synth.feature_dim = 4
synth.node_feature_dim = 6
model.layers = 1
model.heads = 2
model.frame_len = 6
model.timeline_len = 2
model.hidden_dim = 6
model.time_dim = 6
train.learning_rate = 0.01
train.epochs = 2
train.batch_size = 16
eval.classifier_steps = 100
";

/// Temp dir holding `run.conf` and a generated `data/s.csv`.
fn small_run() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), SMALL).unwrap();
    ok(&ftm(dir.path(), &["synth", "-c", "run.conf", "--out", "data/s.csv"]));
    dir
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_dataset_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = ftm(dir.path(), &["train", "--dataset", "nowhere/links.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere/links.csv"), "{}", stderr(&out));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn no_dataset_at_all_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ftm(dir.path(), &["train"]).status.code(), Some(3));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.conf"), "model.depth = 3\n").unwrap();
    let out = ftm(dir.path(), &["train", "-c", "bad.conf"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("model.depth"));
    let out = ftm(dir.path(), &["train", "--set", "train.momentum=0.9"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_is_deterministic_and_loadable() {
    let dir = small_run();
    ok(&ftm(dir.path(), &["synth", "-c", "run.conf", "--out", "again/s.csv"]));
    for name in ["s.csv", "s.nodes.csv", "s.truth.json"] {
        let a = fs::read(dir.path().join("data").join(name)).unwrap();
        let b = fs::read(dir.path().join("again").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let g = load_csv(dir.path().join("data/s.csv"), &LoadOptions::default()).unwrap();
    assert_eq!(g.len(), 300);

    ok(&ftm(dir.path(), &["synth", "-c", "run.conf", "--seed", "1", "--out", "other/s.csv"]));
    assert_ne!(
        fs::read(dir.path().join("data/s.csv")).unwrap(),
        fs::read(dir.path().join("other/s.csv")).unwrap()
    );
}

#[test]
fn full_preference_sidecar_names_one_item_per_user() {
    let dir = tempfile::tempdir().unwrap();
    ok(&ftm(
        dir.path(),
        &["synth", "--out", "p1.csv", "-s", "synth.preference=1.0", "-s", "synth.users=7", "-s", "synth.items=3"],
    ));
    let truth = read_json(dir.path().join("p1.truth.json"));
    let preferred = truth["preferred"].as_object().unwrap();
    assert_eq!(preferred.len(), 7);
    let g = load_csv(dir.path().join("p1.csv"), &LoadOptions::default()).unwrap();
    for l in g.links() {
        let user = g.key(l.src).raw.to_string();
        assert_eq!(preferred[&user].as_u64(), Some(g.key(l.dst).raw));
    }
}

#[test]
fn unwritable_synth_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = ftm(dir.path(), &["synth", "--out", "blocker/s.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_all_artifacts_and_eval_reads_them() {
    let dir = small_run();
    ok(&ftm(dir.path(), &["train", "-c", "run.conf"]));
    let out = dir.path().join("out");
    for f in ["checkpoint.ftm", "epochs.jsonl", "timing.jsonl", "split.json", "config.resolved", "fit.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let log = fs::read_to_string(out.join("epochs.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["epoch"], 1);
    assert!(first["train_loss"].is_f64() && first["val_ap"].is_f64());
    assert_eq!(read_json(out.join("split.json"))["links"], 300);

    let table = ok(&ftm(dir.path(), &["eval", "-c", "run.conf", "--task", "link"]));
    assert!(table.contains("transductive"));
    let link = read_json(out.join("eval-link.json"));
    assert_eq!(link["metric"], "AP");
    assert_eq!(link["task"], "link");
    assert_eq!(link["setting"], "transductive");
    assert!((0.0..=1.0).contains(&link["value"].as_f64().unwrap()));
    assert_eq!(link["config"]["model"]["hidden_dim"], 6);

    ok(&ftm(dir.path(), &["eval", "-c", "run.conf", "--task", "link", "-s", "eval.setting=inductive"]));
    assert_eq!(read_json(out.join("eval-link.json"))["setting"], "inductive");

    ok(&ftm(dir.path(), &["eval", "-c", "run.conf", "--task", "node"]));
    ok(&ftm(dir.path(), &["eval", "-c", "run.conf", "--task", "attack", "-s", "eval.attack_intensities=0"]));
    let node = read_json(out.join("eval-node.json"));
    let attack = read_json(out.join("eval-attack.json"));
    assert_eq!(node["metric"], "AUC");
    assert_eq!(attack["auc"][0].as_f64(), node["value"].as_f64());

    ok(&ftm(dir.path(), &["eval", "-c", "run.conf", "--task", "stability"]));
    let stability = read_json(out.join("eval-stability.json"));
    assert_eq!(stability["metric"], "cosine-stability");
    assert!(stability["nodes"].as_u64().unwrap() > 0);
}

#[test]
fn checkpoint_shape_mismatch_exits_3_with_both_shapes() {
    let dir = small_run();
    ok(&ftm(dir.path(), &["train", "-c", "run.conf", "-s", "train.epochs=0"]));
    let out = ftm(dir.path(), &["eval", "-c", "run.conf", "--task", "link", "-s", "model.hidden_dim=4"]);
    assert_eq!(out.status.code(), Some(3));
    let msg = stderr(&out);
    assert!(msg.contains("[16, 3]") && msg.contains("[14, 2]"), "{msg}");
}

#[test]
fn corrupt_checkpoint_exits_2() {
    let dir = small_run();
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/checkpoint.ftm"), b"FTM1\x05").unwrap();
    let out = ftm(dir.path(), &["eval", "-c", "run.conf", "--task", "link"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_training_exits_4() {
    let dir = small_run();
    let out = ftm(dir.path(), &["train", "-c", "run.conf", "-s", "train.learning_rate=1e300"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn precedence_is_flags_then_env_then_file() {
    let dir = small_run();
    let seed_of = |dir: &Path| {
        let text = fs::read_to_string(dir.join("out/config.resolved")).unwrap();
        text.lines().find(|l| l.starts_with("seed = ")).unwrap().to_string()
    };
    let mut conf = SMALL.to_string();
    conf.push_str("seed = 3\ntrain.epochs = 0\n");
    conf = conf.replace("train.epochs = 2\n", "");
    fs::write(dir.path().join("seeded.conf"), conf).unwrap();

    ok(&ftm(dir.path(), &["train", "-c", "seeded.conf"]));
    assert_eq!(seed_of(dir.path()), "seed = 3");
    ok(&ftm_env(dir.path(), &["train", "-c", "seeded.conf"], &[("FTM_SEED", "5")]));
    assert_eq!(seed_of(dir.path()), "seed = 5");
    ok(&ftm_env(dir.path(), &["train", "-c", "seeded.conf", "--seed", "9"], &[("FTM_SEED", "5")]));
    assert_eq!(seed_of(dir.path()), "seed = 9");
}

#[test]
fn rerun_from_snapshot_reproduces_artifacts() {
    let dir = small_run();
    ok(&ftm(dir.path(), &["train", "-c", "run.conf"]));
    let files = ["checkpoint.ftm", "epochs.jsonl", "split.json", "config.resolved", "fit.json"];
    let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join("out").join(f)).unwrap()).collect();
    fs::copy(dir.path().join("out/config.resolved"), dir.path().join("snapshot.conf")).unwrap();
    ok(&ftm(dir.path(), &["train", "-c", "snapshot.conf"]));
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&fs::read(dir.path().join("out").join(f)).unwrap(), bytes, "{f}");
    }
}

#[test]
fn transfer_to_a_wider_dataset() {
    let dir = small_run();
    ok(&ftm(dir.path(), &["train", "-c", "run.conf"]));
    ok(&ftm(
        dir.path(),
        &["synth", "-c", "run.conf", "--seed", "4", "-s", "synth.feature_dim=7", "--out", "data/t.csv"],
    ));
    let table = ok(&ftm(
        dir.path(),
        &[
            "eval",
            "-c",
            "run.conf",
            "--task",
            "transfer",
            "-s",
            "eval.transfer_dataset=data/t.csv",
            "-s",
            "eval.transfer_node_features=data/t.nodes.csv",
        ],
    ));
    assert!(table.lines().nth(2).unwrap().starts_with("s  "), "{table}");
    let report = read_json(dir.path().join("out/eval-transfer.json"));
    assert_eq!(report["task"], "transfer");
    assert_eq!(report["metric"], "AP");
}

#[test]
fn neighborhood_sweep_has_four_rows() {
    let dir = small_run();
    let table = ok(&ftm(
        dir.path(),
        &["eval", "-c", "run.conf", "--task", "sweep", "-s", "train.epochs=1"],
    ));
    let labels: Vec<&str> = table.lines().skip(2).map(|l| l.split("  ").next().unwrap()).collect();
    assert_eq!(labels, ["(1, 10)", "(1, 20)", "(2, 10)", "(2, 20)"]);
    let report = read_json(dir.path().join("out/eval-sweep.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert_eq!(report["rows"][3]["layers"], 2);
    assert_eq!(report["rows"][3]["frame_len"], 20);
}

#[test]
fn inspect_timeline_reports_reference_times() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (1..=5).map(|t| format!("0,{t},{t},\n")).collect();
    fs::write(dir.path().join("chain.csv"), format!("src,dst,timestamp,label\n{rows}")).unwrap();
    let out = ok(&ftm(
        dir.path(),
        &[
            "inspect-timeline",
            "--dataset",
            "chain.csv",
            "-s",
            "model.frame_len=2",
            "-s",
            "model.timeline_len=3",
            "--node",
            "0",
            "--time",
            "6",
        ],
    ));
    let dump: Value = serde_json::from_str(&out).unwrap();
    let refs: Vec<f64> = dump["frames"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["ref_time"].as_f64().unwrap())
        .collect();
    assert_eq!(refs, [4.0, 5.0, 6.0]);
    assert_eq!(dump["frames"][2]["entries"][0]["neighbor"]["raw"], 5);
    assert_eq!(dump["valid_frames"], 3);

    let missing = ftm(dir.path(), &["inspect-timeline", "--dataset", "chain.csv", "--node", "42", "--time", "6"]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn quickstart_config_finishes_within_five_minutes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quickstart.conf");
    let conf = conf.to_str().unwrap();
    let started = Instant::now();
    ok(&ftm(dir.path(), &["synth", "-c", conf, "--out", "data/synth.csv"]));
    ok(&ftm(dir.path(), &["train", "-c", conf]));
    ok(&ftm(dir.path(), &["eval", "-c", conf, "--task", "link"]));
    assert!(started.elapsed().as_secs() < 300, "{:?}", started.elapsed());
    let report = read_json(dir.path().join("runs/quickstart/eval-link.json"));
    assert!(report["value"].as_f64().unwrap() > 0.5);
}

#[test]
fn jodie_style_bipartite_file_trains() {
    // user and item ids both start at 0; the header names one feature column
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("user_id,item_id,timestamp,state_label,comma_separated_list_of_features\n");
    for i in 0..240u32 {
        let (user, item) = (i % 6, (i % 6) % 3);
        text.push_str(&format!("{user},{item},{}.0,{},{},{}\n", i * 3, u32::from(i % 17 == 0), i % 5, user));
    }
    fs::write(dir.path().join("wiki.csv"), text).unwrap();
    let args = [
        "train", "--dataset", "wiki.csv", "-s", "id_space=bipartite", "-s", "model.layers=1", "-s",
        "model.frame_len=4", "-s", "model.hidden_dim=4", "-s", "model.time_dim=4", "-s", "train.epochs=1", "-o", "out",
    ];
    ok(&ftm(dir.path(), &args));
    let split = read_json(dir.path().join("out/split.json"));
    assert_eq!(split["links"], 240);
    let resolved = fs::read_to_string(dir.path().join("out/config.resolved")).unwrap();
    assert!(resolved.contains("id_space = bipartite"));
}

#[test]
fn every_config_key_is_documented() {
    let docs = include_str!("../../../docs/formats.md");
    for (key, value) in ftm_cli::config::RunConfig::default().entries() {
        let row = format!("| `{key}` |");
        let line = docs.lines().find(|l| l.starts_with(&row)).unwrap_or_else(|| panic!("{key} undocumented"));
        if value != "none" {
            assert!(line.contains(&format!("`{value}`")), "{key}: default {value} vs {line}");
        }
    }
}
