use std::fs;
use std::io::{LineWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ftm_core::evaluation::{
    attack_eval, case_study_sweep, embedding_stability, eval_link_prediction, finetune_node_classifier,
    interaction_times, render_table, transfer_eval, EvalReport, SweepAxis,
};
use ftm_core::framing::build_timeline;
use ftm_core::graph::{
    chronological_split, load_csv, load_node_features, synth_generate, DatasetSplit, LoadOptions, NodeKey, NodeRole,
    TemporalGraph,
};
use ftm_core::model::FtmModel;
use ftm_core::tensor::checkpoint;
use ftm_core::training::{fit, FitReport};
use serde_json::json;

use crate::config::{RunConfig, SweepKind};
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.ftm";
pub const EPOCH_LOG_FILE: &str = "epochs.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const CONFIG_FILE: &str = "config.resolved";
pub const FIT_FILE: &str = "fit.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    Link,
    Node,
    Attack,
    Transfer,
    Stability,
    Sweep,
}

impl EvalTask {
    pub fn name(self) -> &'static str {
        match self {
            EvalTask::Link => "link",
            EvalTask::Node => "node",
            EvalTask::Attack => "attack",
            EvalTask::Transfer => "transfer",
            EvalTask::Stability => "stability",
            EvalTask::Sweep => "sweep",
        }
    }
}

impl FromStr for EvalTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "link" => EvalTask::Link,
            "node" => EvalTask::Node,
            "attack" => EvalTask::Attack,
            "transfer" => EvalTask::Transfer,
            "stability" => EvalTask::Stability,
            "sweep" => EvalTask::Sweep,
            _ => return Err(format!("unknown task `{s}` (link, node, attack, transfer, stability, sweep)")),
        })
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn load_graph(
    links: &Path,
    node_features: Option<&Path>,
    config: &RunConfig,
) -> Result<TemporalGraph, CliError> {
    let options = LoadOptions {
        has_header: config.header,
        id_space: config.id_space,
    };
    let graph = load_csv(links, &options)?;
    match node_features {
        Some(path) => Ok(graph.with_node_features(&load_node_features(path, config.header)?)?),
        None => Ok(graph),
    }
}

/// The configured dataset and its chronological split.
pub fn load_dataset(config: &RunConfig) -> Result<(TemporalGraph, DatasetSplit), CliError> {
    let path = config
        .dataset
        .as_deref()
        .ok_or_else(|| CliError::Config("no dataset given (set `dataset` or pass --dataset)".into()))?;
    let graph = load_graph(path, config.node_features.as_deref(), config)?;
    let split = chronological_split(&graph, &config.split)?;
    Ok((graph, split))
}

#[derive(Debug)]
pub struct TrainSummary {
    pub fit: FitReport,
    pub output: PathBuf,
}

/// Load, split, fit; writes every artifact under the output directory.
pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary, CliError> {
    let (graph, split) = load_dataset(config)?;
    let dir = &config.output;
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), config.snapshot())?;
    write_file(&dir.join(SPLIT_FILE), pretty(&split.manifest(&graph)))?;

    let mut model = FtmModel::new(config.model_config(graph.feature_dim()), config.seed)?;
    let log_path = dir.join(EPOCH_LOG_FILE);
    let file = fs::File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    let mut log = LineWriter::new(file);
    let report = fit(&mut model, &graph, &split, &config.train, &mut log)?;
    log.flush().map_err(|e| CliError::io(&log_path, e))?;

    write_file(&dir.join(CHECKPOINT_FILE), checkpoint::to_bytes(model.params()))?;
    let timing: String = report
        .epoch_seconds
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}\n", json!({"epoch": i + 1, "seconds": s})))
        .collect();
    write_file(&dir.join(TIMING_FILE), timing)?;
    write_file(
        &dir.join(FIT_FILE),
        pretty(&json!({
            "epochs_run": report.history.len(),
            "best_epoch": report.best_epoch,
            "best_val_ap": report.best_val_ap,
        })),
    )?;
    Ok(TrainSummary {
        fit: report,
        output: dir.clone(),
    })
}

pub fn load_model(config: &RunConfig, path: &Path, feature_width: usize) -> Result<FtmModel, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let params = checkpoint::from_bytes(&bytes)?;
    Ok(FtmModel::from_params(config.model_config(feature_width), params)?)
}

/// A report as JSON plus the same numbers as a text table.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub json: serde_json::Value,
    pub table: String,
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn percent(v: f64) -> String {
    ((v * 100.0 * 1e6).round() / 1e6).to_string()
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn single(report: EvalReport, column: &str, config: &RunConfig) -> EvalOutput {
    let table = render_table(&["model".into(), column.into()], &[vec!["FTM".into(), fmt(report.value)]]);
    EvalOutput {
        json: serde_json::to_value(report.with_config(config.echo())).expect("report serializes"),
        table,
    }
}

/// Runs one evaluation task. `checkpoint` defaults to the one in the
/// output directory; the sweep trains its own models and ignores it.
pub fn cmd_eval(config: &RunConfig, checkpoint: Option<&Path>, task: EvalTask) -> Result<EvalOutput, CliError> {
    let (graph, split) = load_dataset(config)?;
    let setting = config.eval.setting;
    let model = || {
        let default = config.output.join(CHECKPOINT_FILE);
        load_model(config, checkpoint.unwrap_or(&default), graph.feature_dim())
    };
    let output = match task {
        EvalTask::Link => {
            let report = eval_link_prediction(&model()?, &graph, &split, setting, config.seed)?;
            single(report, &setting.to_string(), config)
        }
        EvalTask::Node => {
            let report = finetune_node_classifier(&model()?, &graph, &config.eval.classifier, config.seed)?;
            single(report, "AUC", config)
        }
        EvalTask::Attack => {
            let result = attack_eval(&model()?, &graph, &config.eval.classifier, &config.attack_sweep())?;
            let mut headers = vec!["model".to_string()];
            headers.extend(result.intensities.iter().map(|&i| percent(i)));
            let mut row = vec!["FTM".to_string()];
            row.extend(result.auc.iter().map(|&v| fmt(v)));
            EvalOutput {
                json: json!({
                    "task": "attack",
                    "metric": "AUC",
                    "intensities": result.intensities,
                    "auc": result.auc,
                    "repetitions": result.repetitions,
                    "seed": result.seed,
                    "config": config.echo(),
                }),
                table: render_table(&headers, &[row]),
            }
        }
        EvalTask::Transfer => {
            let path = config.eval.transfer_dataset.as_deref().ok_or_else(|| {
                CliError::Config("transfer needs `eval.transfer_dataset`".into())
            })?;
            let target = load_graph(path, config.eval.transfer_node_features.as_deref(), config)?;
            let target_split = chronological_split(&target, &config.split)?;
            let report = transfer_eval(&model()?, &target, &target_split, setting, config.seed)?;
            let source = config.dataset.as_deref().map(stem).unwrap_or_default();
            let table = render_table(
                &["train".into(), "test".into(), setting.to_string()],
                &[vec![source, stem(path), fmt(report.value)]],
            );
            EvalOutput {
                json: serde_json::to_value(report.with_config(config.echo())).expect("report serializes"),
                table,
            }
        }
        EvalTask::Stability => {
            let keep = config.eval.stability_times;
            let mut probes = Vec::new();
            for node in graph.active_nodes() {
                let times = interaction_times(&graph, node)?;
                if times.len() >= 2 && keep >= 2 {
                    probes.push((node, times[times.len().saturating_sub(keep)..].to_vec()));
                }
            }
            let stability = embedding_stability(&model()?, &graph, &probes)?;
            let table = render_table(
                &["model".into(), "cosine".into(), "nodes".into(), "pairs".into()],
                &[vec![
                    "FTM".into(),
                    fmt(stability.mean_cosine),
                    stability.nodes.to_string(),
                    stability.pairs.to_string(),
                ]],
            );
            EvalOutput {
                json: json!({
                    "task": "stability",
                    "metric": "cosine-stability",
                    "value": stability.mean_cosine,
                    "instances": stability.pairs,
                    "nodes": stability.nodes,
                    "skipped": stability.skipped,
                    "seed": config.seed,
                    "config": config.echo(),
                }),
                table,
            }
        }
        EvalTask::Sweep => {
            let axis = match config.eval.sweep_axis {
                SweepKind::Neighborhood => SweepAxis::neighborhood(),
                SweepKind::DataFraction => SweepAxis::data_fraction(),
            };
            let model_config = config.model_config(graph.feature_dim());
            let rows = case_study_sweep(&axis, &graph, &split, &model_config, &config.train, setting)?;
            let first = match config.eval.sweep_axis {
                SweepKind::Neighborhood => "(layers, frame)",
                SweepKind::DataFraction => "training data",
            };
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.label.clone(), fmt(r.report.value)])
                .collect();
            EvalOutput {
                json: json!({
                    "task": "sweep",
                    "axis": config.eval.sweep_axis,
                    "metric": "AP",
                    "rows": rows,
                    "seed": config.seed,
                    "config": config.echo(),
                }),
                table: render_table(&[first.into(), setting.to_string()], &cells),
            }
        }
    };
    create_dir(&config.output)?;
    let base = config.output.join(format!("eval-{}", task.name()));
    write_file(&base.with_extension("json"), pretty(&output.json))?;
    write_file(&base.with_extension("txt"), &output.table)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub links: PathBuf,
    pub node_features: Option<PathBuf>,
    pub truth: PathBuf,
}

/// `out.csv` plus `out.nodes.csv` and `out.truth.json` next to it.
pub fn synth_paths(out: &Path, with_features: bool) -> SynthFiles {
    let sibling = |suffix: &str| out.with_file_name(format!("{}.{suffix}", stem(out)));
    SynthFiles {
        links: out.to_path_buf(),
        node_features: with_features.then(|| sibling("nodes.csv")),
        truth: sibling("truth.json"),
    }
}

pub fn cmd_synth(config: &RunConfig, out: Option<&Path>) -> Result<SynthFiles, CliError> {
    let data = synth_generate(&config.synth)?;
    let default = config.output.join("synth.csv");
    let files = synth_paths(out.unwrap_or(&default), !data.node_features.is_empty());
    if let Some(parent) = files.links.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    data.write_links(&files.links)?;
    if let Some(path) = &files.node_features {
        data.write_node_features(path)?;
    }
    write_file(&files.truth, data.truth_json() + "\n")?;
    Ok(files)
}

/// Frames of one node's timeline at `time`, with raw node ids.
pub fn cmd_inspect_timeline(
    config: &RunConfig,
    raw: u64,
    role: Option<NodeRole>,
    time: f64,
) -> Result<serde_json::Value, CliError> {
    config.model.validate()?;
    let (graph, _) = load_dataset(config)?;
    let node = match role {
        Some(role) => graph.node_by_key(NodeKey { raw, role }),
        None => graph.node_by_raw(raw),
    }
    .ok_or_else(|| CliError::Config(format!("node {raw} does not occur in the dataset")))?;
    let timeline = build_timeline(&graph, node, time, config.model.frame_len, config.model.timeline_len)?;
    let frames: Vec<_> = timeline
        .frames
        .iter()
        .map(|f| {
            let entries: Vec<_> = f
                .entries
                .iter()
                .map(|e| json!({"neighbor": graph.key(e.neighbor), "link": e.link_index, "timestamp": e.timestamp}))
                .collect();
            json!({"ref_time": f.ref_time, "entries": entries})
        })
        .collect();
    Ok(json!({
        "node": graph.key(node),
        "query_time": time,
        "frame_len": config.model.frame_len,
        "timeline_len": config.model.timeline_len,
        "valid_frames": timeline.valid_count(),
        "frames": frames,
    }))
}
