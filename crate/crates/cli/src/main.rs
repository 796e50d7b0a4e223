use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ftm_cli::commands::{cmd_eval, cmd_inspect_timeline, cmd_synth, cmd_train, EvalTask};
use ftm_cli::config::{resolve, RunConfig};
use ftm_cli::CliError;
use ftm_core::graph::NodeRole;

#[derive(Parser)]
#[command(name = "ftm", version, about = "Frame-level timeline models for temporal link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, String)>,
    /// Same as `--set dataset=PATH`.
    #[arg(long)]
    dataset: Option<String>,
    /// Same as `--set output=DIR`.
    #[arg(short, long)]
    output: Option<String>,
    /// Same as `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut overrides = self.set.clone();
        if let Some(d) = &self.dataset {
            overrides.push(("dataset".into(), d.clone()));
        }
        if let Some(o) = &self.output {
            overrides.push(("output".into(), o.clone()));
        }
        if let Some(s) = self.seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        resolve(self.config.as_deref(), &overrides)
    }
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("`{s}` is not KEY=VALUE"))
}

fn parse_role(s: &str) -> Result<NodeRole, String> {
    match s {
        "src" | "source" => Ok(NodeRole::Source),
        "dst" | "destination" => Ok(NodeRole::Destination),
        "any" => Ok(NodeRole::Any),
        _ => Err(format!("unknown role `{s}` (src, dst, any)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write its checkpoint, logs and split manifest.
    Train(Common),
    /// Evaluate a checkpoint on one task.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = |s: &str| s.parse::<EvalTask>())]
        task: EvalTask,
        /// Defaults to `<output>/checkpoint.ftm`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Links CSV; sidecars are written next to it. Defaults to
        /// `<output>/synth.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the frames of one node's timeline as JSON.
    InspectTimeline {
        #[command(flatten)]
        common: Common,
        /// Raw node id as it appears in the dataset.
        #[arg(long)]
        node: u64,
        /// Column the id comes from in bipartite datasets.
        #[arg(long, value_parser = parse_role)]
        role: Option<NodeRole>,
        #[arg(long)]
        time: f64,
    },
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => {
            let config = common.resolve()?;
            let summary = cmd_train(&config)?;
            match (summary.fit.best_epoch, summary.fit.best_val_ap) {
                (Some(epoch), Some(ap)) => emit(&format!(
                    "best validation AP {ap:.4} at epoch {epoch}; artifacts in {}\n",
                    summary.output.display()
                )),
                _ => emit(&format!("no epochs run; artifacts in {}\n", summary.output.display())),
            }
        }
        Command::Eval { common, task, checkpoint } => {
            let config = common.resolve()?;
            emit(&cmd_eval(&config, checkpoint.as_deref(), task)?.table);
        }
        Command::Synth { common, out } => {
            let config = common.resolve()?;
            let files = cmd_synth(&config, out.as_deref())?;
            emit(&format!("{}\n", files.links.display()));
        }
        Command::InspectTimeline { common, node, role, time } => {
            let config = common.resolve()?;
            let dump = cmd_inspect_timeline(&config, node, role, time)?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&dump).expect("json")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
