//! Flat `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Keys are unique;
//! unknown keys are rejected. Resolution order is defaults, then the file,
//! then `FTM_SEED`, then command-line overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ftm_core::evaluation::{AttackSweep, ClassifierConfig, Setting};
use ftm_core::graph::{IdSpace, SplitConfig, SynthSpec};
use ftm_core::model::ModelConfig;
use ftm_core::training::TrainConfig;
use serde::Serialize;

use crate::CliError;

pub const SEED_ENV: &str = "FTM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Neighborhood,
    DataFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSettings {
    pub setting: Setting,
    pub attack_intensities: Vec<f64>,
    pub attack_repetitions: usize,
    pub classifier: ClassifierConfig,
    pub transfer_dataset: Option<PathBuf>,
    pub transfer_node_features: Option<PathBuf>,
    pub sweep_axis: SweepKind,
    /// Most recent interaction times per node used for stability.
    pub stability_times: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub node_features: Option<PathBuf>,
    pub header: bool,
    pub id_space: IdSpace,
    pub output: PathBuf,
    /// Drives training, splitting, synthesis and evaluation sampling.
    pub seed: u64,
    /// `None` means "take the width from the dataset".
    pub link_feature_dim: Option<usize>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub eval: EvalSettings,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let attack = AttackSweep::default();
        Self {
            dataset: None,
            node_features: None,
            header: true,
            id_space: IdSpace::Shared,
            output: PathBuf::from("runs/default"),
            seed: 0,
            link_feature_dim: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
            eval: EvalSettings {
                setting: Setting::Transductive,
                attack_intensities: attack.intensities,
                attack_repetitions: attack.repetitions,
                classifier: ClassifierConfig::default(),
                transfer_dataset: None,
                transfer_node_features: None,
                sweep_axis: SweepKind::Neighborhood,
                stability_times: 20,
            },
            synth: SynthSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("none".into(), |p| p.display().to_string())
}

fn show_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = optional_path(v),
            "node_features" => self.node_features = optional_path(v),
            "header" => self.header = parse_bool(key, v)?,
            "id_space" => {
                self.id_space = match v {
                    "shared" => IdSpace::Shared,
                    "bipartite" => IdSpace::Bipartite,
                    _ => return Err(CliError::Config(format!("`id_space`: expected shared or bipartite, got `{v}`"))),
                }
            }
            "output" => self.output = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "model.layers" => self.model.layers = parse(key, v)?,
            "model.heads" => self.model.heads = parse(key, v)?,
            "model.frame_len" => self.model.frame_len = parse(key, v)?,
            "model.timeline_len" => self.model.timeline_len = parse(key, v)?,
            "model.hidden_dim" => self.model.hidden_dim = parse(key, v)?,
            "model.time_dim" => self.model.time_dim = parse(key, v)?,
            "model.link_feature_dim" => {
                self.link_feature_dim = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "train.learning_rate" => self.train.learning_rate = parse(key, v)?,
            "train.epochs" => self.train.epochs = parse(key, v)?,
            "train.batch_size" => self.train.batch_size = parse(key, v)?,
            "train.negatives" => self.train.negatives = parse(key, v)?,
            "train.patience" => self.train.patience = parse(key, v)?,
            "train.record_wall_time" => self.train.record_wall_time = parse_bool(key, v)?,
            "split.train_ratio" => self.split.train_ratio = parse(key, v)?,
            "split.validation_ratio" => self.split.validation_ratio = parse(key, v)?,
            "split.test_ratio" => self.split.test_ratio = parse(key, v)?,
            "split.new_node_fraction" => self.split.new_node_fraction = parse(key, v)?,
            "eval.setting" => self.eval.setting = v.parse().map_err(|e| CliError::Config(format!("`{key}`: {e}")))?,
            "eval.attack_intensities" => {
                self.eval.attack_intensities = v
                    .split(',')
                    .map(|s| parse(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "eval.attack_repetitions" => self.eval.attack_repetitions = parse(key, v)?,
            "eval.classifier_steps" => self.eval.classifier.steps = parse(key, v)?,
            "eval.classifier_learning_rate" => self.eval.classifier.learning_rate = parse(key, v)?,
            "eval.classifier_train_fraction" => self.eval.classifier.train_fraction = parse(key, v)?,
            "eval.transfer_dataset" => self.eval.transfer_dataset = optional_path(v),
            "eval.transfer_node_features" => self.eval.transfer_node_features = optional_path(v),
            "eval.sweep_axis" => {
                self.eval.sweep_axis = match v {
                    "neighborhood" => SweepKind::Neighborhood,
                    "data_fraction" => SweepKind::DataFraction,
                    _ => {
                        return Err(CliError::Config(format!(
                            "`{key}`: expected neighborhood or data_fraction, got `{v}`"
                        )))
                    }
                }
            }
            "eval.stability_times" => self.eval.stability_times = parse(key, v)?,
            "synth.users" => self.synth.users = parse(key, v)?,
            "synth.items" => self.synth.items = parse(key, v)?,
            "synth.links" => self.synth.links = parse(key, v)?,
            "synth.feature_dim" => self.synth.feature_dim = parse(key, v)?,
            "synth.node_feature_dim" => self.synth.node_feature_dim = parse(key, v)?,
            "synth.preference" => self.synth.preference = parse(key, v)?,
            "synth.mean_gap" => self.synth.mean_gap = parse(key, v)?,
            "synth.positive_fraction" => self.synth.positive_fraction = parse(key, v)?,
            "synth.label_switch" => self.synth.label_switch = parse(key, v)?,
            "synth.label_signal" => self.synth.label_signal = parse(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in documentation order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let t = &self.train;
        let s = &self.split;
        let e = &self.eval;
        let y = &self.synth;
        vec![
            ("dataset", show_path(&self.dataset)),
            ("node_features", show_path(&self.node_features)),
            ("header", self.header.to_string()),
            (
                "id_space",
                match self.id_space {
                    IdSpace::Shared => "shared".into(),
                    IdSpace::Bipartite => "bipartite".into(),
                },
            ),
            ("output", self.output.display().to_string()),
            ("seed", self.seed.to_string()),
            ("model.layers", m.layers.to_string()),
            ("model.heads", m.heads.to_string()),
            ("model.frame_len", m.frame_len.to_string()),
            ("model.timeline_len", m.timeline_len.to_string()),
            ("model.hidden_dim", m.hidden_dim.to_string()),
            ("model.time_dim", m.time_dim.to_string()),
            (
                "model.link_feature_dim",
                self.link_feature_dim.map_or("auto".into(), |d| d.to_string()),
            ),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.negatives", t.negatives.to_string()),
            ("train.patience", t.patience.to_string()),
            ("train.record_wall_time", t.record_wall_time.to_string()),
            ("split.train_ratio", s.train_ratio.to_string()),
            ("split.validation_ratio", s.validation_ratio.to_string()),
            ("split.test_ratio", s.test_ratio.to_string()),
            ("split.new_node_fraction", s.new_node_fraction.to_string()),
            ("eval.setting", e.setting.to_string()),
            ("eval.attack_intensities", show_list(&e.attack_intensities)),
            ("eval.attack_repetitions", e.attack_repetitions.to_string()),
            ("eval.classifier_steps", e.classifier.steps.to_string()),
            ("eval.classifier_learning_rate", e.classifier.learning_rate.to_string()),
            ("eval.classifier_train_fraction", e.classifier.train_fraction.to_string()),
            ("eval.transfer_dataset", show_path(&e.transfer_dataset)),
            ("eval.transfer_node_features", show_path(&e.transfer_node_features)),
            (
                "eval.sweep_axis",
                match e.sweep_axis {
                    SweepKind::Neighborhood => "neighborhood".into(),
                    SweepKind::DataFraction => "data_fraction".into(),
                },
            ),
            ("eval.stability_times", e.stability_times.to_string()),
            ("synth.users", y.users.to_string()),
            ("synth.items", y.items.to_string()),
            ("synth.links", y.links.to_string()),
            ("synth.feature_dim", y.feature_dim.to_string()),
            ("synth.node_feature_dim", y.node_feature_dim.to_string()),
            ("synth.preference", y.preference.to_string()),
            ("synth.mean_gap", y.mean_gap.to_string()),
            ("synth.positive_fraction", y.positive_fraction.to_string()),
            ("synth.label_switch", y.label_switch.to_string()),
            ("synth.label_signal", y.label_signal.to_string()),
        ]
    }

    /// Applies every assignment in a config text.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("line {}: `{key}` set twice", n + 1)));
            }
            self.set(key, value)
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    /// Copies the master seed into every component that samples.
    pub fn propagate_seed(&mut self) {
        self.train.seed = self.seed;
        self.split.seed = self.seed;
        self.synth.seed = self.seed;
    }

    /// Text that reproduces this configuration when read back.
    pub fn snapshot(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for (k, v) in self.entries() {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    pub fn attack_sweep(&self) -> AttackSweep {
        AttackSweep {
            intensities: self.eval.attack_intensities.clone(),
            repetitions: self.eval.attack_repetitions,
            seed: self.seed,
        }
    }

    /// Model configuration for a dataset whose links carry `data_width`
    /// features.
    pub fn model_config(&self, data_width: usize) -> ModelConfig {
        ModelConfig {
            link_feature_dim: self.link_feature_dim.unwrap_or(data_width),
            ..self.model.clone()
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Defaults, then `file`, then `FTM_SEED`, then `overrides`.
pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = file {
        config.apply_file(path)?;
    }
    if let Ok(seed) = std::env::var(SEED_ENV) {
        config.seed = parse(SEED_ENV, seed.trim())?;
    }
    for (k, v) in overrides {
        config.set(k, v)?;
    }
    config.propagate_seed();
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig::default();
        c.set("model.link_feature_dim", "7").unwrap();
        c.set("eval.attack_intensities", "0, 0.25").unwrap();
        c.set("dataset", "data/x.csv").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.snapshot()).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::default().snapshot().lines().count(), c.entries().len() + 1);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let mut c = RunConfig::default();
        c.apply_text("# header\n\nseed = 5   # trailing\n model.layers=1\n").unwrap();
        assert_eq!((c.seed, c.model.layers), (5, 1));
    }

    #[test]
    fn unknown_and_duplicate_keys_fail() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("model.depth = 3"), Err(CliError::Config(_))));
        assert!(matches!(c.apply_text("seed = 1\nseed = 2"), Err(CliError::Config(_))));
        assert!(matches!(c.apply_text("seed"), Err(CliError::Config(_))));
        assert!(matches!(c.set("train.epochs", "many"), Err(CliError::Config(_))));
    }
}
