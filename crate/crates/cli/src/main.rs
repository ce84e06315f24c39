//! `re2llm`: mine hints, train the retrieval agent and evaluate it.

mod artifact;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use re2llm_core::eval::Variant;
use re2llm_core::llm::CACHE_DIR_ENV;

use crate::artifact::DirLock;
use crate::commands::Ctx;
use crate::config::{parse_override, read_config_file, resolve, ConfigError};

#[derive(Debug, Parser)]
#[command(name = "re2llm", version, about = "Reflective hint mining and learned hint retrieval for LLM recommenders")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON config file with flat dotted keys, e.g. {"train.beta": 1.0}.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Artifact directory [key: out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; sub-seeds follow it unless set [key: seed].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Chat backend [key: llm.backend].
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Simulated world file for the simulated backend [key: llm.world].
    #[arg(long, global = true, value_name = "FILE")]
    world: Option<PathBuf>,
    /// Prepared dataset [key: dataset].
    #[arg(long, global = true, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Knowledge base file [key: kb.path].
    #[arg(long, global = true, value_name = "FILE")]
    kb: Option<PathBuf>,
    /// Policy checkpoint [key: train.policy].
    #[arg(long, global = true, value_name = "FILE")]
    policy: Option<PathBuf>,
    /// Log verbosity (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Http,
    Simulated,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    NoHint,
    Random,
    All,
    Agent,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::NoHint => Variant::NoHint,
            VariantArg::Random => Variant::RandomHint,
            VariantArg::All => Variant::AllHints,
            VariantArg::Agent => Variant::Agent,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sessionize a raw log, filter, augment and split it.
    PrepareData {
        /// Interaction records, one JSON object per line [key: data.interactions].
        #[arg(long, value_name = "FILE")]
        interactions: Option<PathBuf>,
        /// Item catalog, one JSON object per line [key: data.items].
        #[arg(long, value_name = "FILE")]
        items: Option<PathBuf>,
        /// Minimum item and session support [key: data.min_support].
        #[arg(long)]
        min_support: Option<usize>,
    },
    /// Reflect on missed training sessions and admit effective hints.
    BuildKb {
        /// Maximum number of hints [key: kb.capacity].
        #[arg(long)]
        capacity: Option<usize>,
    },
    /// Train the hint-retrieval policy on a few-shot subset.
    TrainAgent {
        /// Training sessions drawn from the train split [key: train.few_shot].
        #[arg(long)]
        few_shot: Option<usize>,
        /// Passes over the few-shot set [key: train.episodes].
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Score one prompting variant on the test split.
    Evaluate {
        /// Which hinting strategy to score [key: eval.variant].
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Repetitions with fresh candidate sets [key: eval.runs].
        #[arg(long)]
        runs: Option<usize>,
        /// Test sessions per run [key: eval.test_sample_size].
        #[arg(long)]
        sample_size: Option<usize>,
    },
    /// Show the prompt, chosen hint and parsed ranking for one session.
    Recommend {
        #[arg(long)]
        session_id: String,
    },
    /// Generate a simulated world and run the whole pipeline on it.
    Simulate {
        /// Planted error modes [key: sim.num_modes].
        #[arg(long)]
        modes: Option<usize>,
        /// Sessions in the world [key: sim.num_sessions].
        #[arg(long)]
        sessions: Option<usize>,
        /// Items in the catalog [key: sim.num_items].
        #[arg(long)]
        items: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PrepareData { .. } => "prepare-data",
            Command::BuildKb { .. } => "build-kb",
            Command::TrainAgent { .. } => "train-agent",
            Command::Evaluate { .. } => "evaluate",
            Command::Recommend { .. } => "recommend",
            Command::Simulate { .. } => "simulate",
        }
    }

    fn overrides(&self) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::from(p.display().to_string()));
        match self {
            Command::PrepareData { interactions, items, min_support } => {
                put("data.interactions", path(interactions));
                put("data.items", path(items));
                put("data.min_support", min_support.map(Value::from));
            }
            Command::BuildKb { capacity } => put("kb.capacity", capacity.map(Value::from)),
            Command::TrainAgent { few_shot, episodes } => {
                put("train.few_shot", few_shot.map(Value::from));
                put("train.episodes", episodes.map(Value::from));
            }
            Command::Evaluate { variant, runs, sample_size } => {
                put("eval.variant", variant.map(|v| serde_json::to_value(Variant::from(v)).unwrap()));
                put("eval.runs", runs.map(Value::from));
                put("eval.test_sample_size", sample_size.map(Value::from));
            }
            Command::Recommend { .. } => {}
            Command::Simulate { modes, sessions, items } => {
                put("sim.num_modes", modes.map(Value::from));
                put("sim.num_sessions", sessions.map(Value::from));
                put("sim.num_items", items.map(Value::from));
            }
        }
        out
    }
}

impl GlobalArgs {
    fn overrides(&self) -> Result<Vec<(String, Value)>> {
        let mut out = Vec::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::from(p.display().to_string()));
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        put("out", path(&self.out));
        put("seed", self.seed.map(Value::from));
        put(
            "llm.backend",
            self.backend.map(|b| Value::from(match b {
                BackendArg::Http => "http",
                BackendArg::Simulated => "simulated",
            })),
        );
        put("llm.world", path(&self.world));
        put("dataset", path(&self.dataset));
        put("kb.path", path(&self.kb));
        put("train.policy", path(&self.policy));
        for raw in &self.overrides {
            out.push(parse_override(raw)?);
        }
        Ok(out)
    }
}

fn run(cli: Cli) -> Result<()> {
    // defaults < environment < config file < flags
    let mut layers = Vec::new();
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
        layers.push(("llm.cache_dir".to_string(), Value::from(PathBuf::from(dir).display().to_string())));
    }
    if let Some(path) = &cli.global.config {
        layers.extend(read_config_file(path)?);
    }
    layers.extend(cli.command.overrides());
    layers.extend(cli.global.overrides()?);
    let resolved = resolve(&layers)?;
    log::debug!("resolved config: {}", serde_json::to_string(&resolved.flat)?);

    let _lock = DirLock::acquire(&resolved.config.out)?;
    let ctx = Ctx { resolved: &resolved, command: cli.command.name() };
    match &cli.command {
        Command::PrepareData { .. } => commands::prepare_data(&ctx),
        Command::BuildKb { .. } => commands::build_kb(&ctx),
        Command::TrainAgent { .. } => commands::train(&ctx),
        Command::Evaluate { .. } => commands::evaluate_variant(&ctx),
        Command::Recommend { session_id } => commands::recommend(&ctx, session_id),
        Command::Simulate { .. } => commands::simulate(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors and 0 for --help/--version
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.global.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
