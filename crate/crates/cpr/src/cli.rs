//! Command-line interface. Flags override the config file, which
//! overrides the built-in defaults.

use std::fs;
use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use cpr_core::engine::TrainingSetup;
use cpr_core::{AttributeId, EmbeddingTable, HeteroGraph, PolicyKind, UserId};

use crate::checkpoint;
use crate::config::{load_synthetic_spec, ReportFormat, RunConfig};
use crate::error::{Error, IoContext, Result};
use crate::names::Names;
use crate::pipeline::{self, EMBEDDINGS_FILE, FM_LOSS_FILE, POLICY_FILE, RETURNS_FILE};
use crate::report::{self, SeedResult, Summary};
use crate::service::{self, AppState, Model};

#[derive(Debug, Parser)]
#[command(name = "cpr", version, about = "Conversational path reasoning recommender")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train user/item/attribute embeddings on the train split.
    TrainFm(Common),
    /// Train the ask-or-recommend policy on the validation split.
    TrainPolicy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Simulate one conversation per test interaction and report metrics.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// `scpr`, `max-entropy`, `abs-greedy` or a policy checkpoint path.
        #[arg(long = "policy")]
        policies: Vec<String>,
        /// Policy to report relative success rates against.
        #[arg(long)]
        reference: Option<String>,
        #[arg(long = "report", value_enum)]
        reports: Vec<ReportFormat>,
    },
    /// Answer the system's questions in the terminal.
    Chat {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<String>,
        /// Known user id; omit to chat as an anonymous user.
        #[arg(long)]
        user: Option<u32>,
        /// Opening attribute id; asked for when omitted.
        #[arg(long)]
        initial: Option<u32>,
        #[arg(long)]
        names: Option<PathBuf>,
    },
    /// Serve conversations over HTTP.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        names: Option<PathBuf>,
        #[arg(long)]
        idle_timeout_secs: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Edge-list dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML synthetic-generator spec.
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One or more seeds, comma separated.
    #[arg(long = "seed", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_turns: Option<u32>,
}

fn merge_common(cfg: &mut RunConfig, c: &Common) -> Result<()> {
    if let Some(path) = &c.data {
        cfg.data.path = Some(path.clone());
        cfg.data.synthetic = None;
    }
    if let Some(path) = &c.synthetic {
        cfg.data.synthetic = Some(load_synthetic_spec(path)?);
        cfg.data.path = None;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if !c.seeds.is_empty() {
        cfg.seeds = c.seeds.clone();
    }
    if let Some(k) = c.k {
        cfg.k = k;
    }
    if let Some(t) = c.max_turns {
        cfg.max_turns = t;
    }
    Ok(())
}

/// Builds the effective configuration for a command line.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::TrainFm(c) => merge_common(&mut cfg, c)?,
        Command::TrainPolicy { common, episodes } => {
            merge_common(&mut cfg, common)?;
            if let Some(e) = episodes {
                cfg.training.episodes = *e;
            }
        }
        Command::Evaluate { common, policies, reference, reports } => {
            merge_common(&mut cfg, common)?;
            if !policies.is_empty() {
                cfg.eval.policies = policies.clone();
            }
            if reference.is_some() {
                cfg.eval.reference = reference.clone();
            }
            if !reports.is_empty() {
                cfg.eval.reports = reports.clone();
            }
        }
        Command::Chat { common, policy, names, .. } => {
            merge_common(&mut cfg, common)?;
            if let Some(p) = policy {
                cfg.serve.policy = p.clone();
            }
            if names.is_some() {
                cfg.serve.names = names.clone();
            }
        }
        Command::Serve { common, policy, addr, names, idle_timeout_secs } => {
            merge_common(&mut cfg, common)?;
            if let Some(p) = policy {
                cfg.serve.policy = p.clone();
            }
            if let Some(a) = addr {
                cfg.serve.addr = a.clone();
            }
            if names.is_some() {
                cfg.serve.names = names.clone();
            }
            if let Some(s) = idle_timeout_secs {
                cfg.serve.idle_timeout_secs = *s;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).at(path)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).at(path)
}

fn load_embeddings_for(cfg: &RunConfig, seed: u64, g: &HeteroGraph) -> Result<EmbeddingTable> {
    let path = cfg.seed_dir(seed).join(EMBEDDINGS_FILE);
    let (emb, _) = checkpoint::load_embeddings(&path)?;
    emb.check_covers(g).map_err(|e| Error::format(&path, format!("does not match the dataset: {e}")))?;
    Ok(emb)
}

pub fn train_fm(cfg: &RunConfig) -> Result<()> {
    for &seed in &cfg.seeds {
        let ds = pipeline::prepare_data(&cfg.data, seed)?;
        let fm = cpr_core::TrainConfig { seed, ..cfg.fm.clone() };
        let (emb, losses) = pipeline::fit_embeddings(&ds, &fm, seed)?;
        let dir = cfg.seed_dir(seed);
        create_dir(&dir)?;
        checkpoint::save_embeddings(&dir.join(EMBEDDINGS_FILE), &emb, &fm)?;
        write(&dir.join(FM_LOSS_FILE), report::loss_curve_csv(&losses))?;
        eprintln!("seed {seed}: {} epochs, final objective {:.4}", losses.len(), losses.last().copied().unwrap_or(0.0));
    }
    Ok(())
}

pub fn train_policy(cfg: &RunConfig) -> Result<()> {
    for &seed in &cfg.seeds {
        let ds = pipeline::prepare_data(&cfg.data, seed)?;
        let emb = load_embeddings_for(cfg, seed, &ds.graph)?;
        let dqn = cpr_core::DqnConfig { seed, ..cfg.dqn.clone() };
        let setup = TrainingSetup { episodes: cfg.training.episodes, k: cfg.k, max_turns: cfg.max_turns };
        let run = pipeline::fit_policy(&ds, &emb, &dqn, setup, seed)?;
        let dir = cfg.seed_dir(seed);
        checkpoint::save_policy(&dir.join(POLICY_FILE), &run.network, &pipeline::policy_meta(&run.network, cfg, &dqn))?;
        write(&dir.join(RETURNS_FILE), report::returns_csv(&run.returns, &run.losses))?;
        eprintln!("seed {seed}: {} episodes", run.returns.len());
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<Summary> {
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let ds = pipeline::prepare_data(&cfg.data, seed)?;
        let emb = load_embeddings_for(cfg, seed, &ds.graph)?;
        let dir = cfg.seed_dir(seed);
        let policies = cfg
            .eval
            .policies
            .iter()
            .map(|p| pipeline::resolve_policy(p, &dir, cfg.max_turns))
            .collect::<Result<Vec<_>>>()?;
        let specs = pipeline::test_specs(&ds, cfg.k, cfg.max_turns, seed)?;
        let runs = pipeline::evaluate_policies(
            &ds.graph,
            &emb,
            &policies,
            &specs,
            &cfg.dqn.rewards,
            cfg.eval.reference.as_deref(),
        )?;
        create_dir(&dir)?;
        let mut lines = String::new();
        for run in &runs {
            lines.push_str(&report::episode_lines(seed, &run.name, &run.logs));
        }
        write(&dir.join("episodes.jsonl"), lines)?;
        results.push(SeedResult::from_runs(seed, &runs));
    }
    let summary = Summary::new(cfg.k, cfg.max_turns, cfg.eval.reference.clone(), results);
    create_dir(&cfg.out)?;
    if cfg.eval.reports.contains(&ReportFormat::Csv) {
        write(&cfg.out.join("report.csv"), summary.to_csv())?;
    }
    if cfg.eval.reports.contains(&ReportFormat::Json) {
        write(&cfg.out.join("report.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(summary)
}

/// Loads the graph, embeddings and the configured policy for interactive
/// use; the first seed picks the artifacts. No split is needed here.
fn interactive_model(cfg: &RunConfig) -> Result<(HeteroGraph, EmbeddingTable, PolicyKind, Names)> {
    let seed = cfg.seeds[0];
    let graph = pipeline::load_graph(&cfg.data)?.graph;
    let emb = load_embeddings_for(cfg, seed, &graph)?;
    let (_, policy) = pipeline::resolve_policy(&cfg.serve.policy, &cfg.seed_dir(seed), cfg.max_turns)?;
    let names = match &cfg.serve.names {
        Some(path) => Names::load(path)?,
        None => Names::default(),
    };
    Ok((graph, emb, policy, names))
}

pub fn chat<R: BufRead, W: Write>(
    cfg: &RunConfig,
    user: Option<u32>,
    initial: Option<u32>,
    mut input: R,
    mut output: W,
) -> Result<cpr_core::EpisodeLog> {
    let (graph, mut emb, mut policy, names) = interactive_model(cfg)?;
    let user = match user {
        Some(u) => {
            graph.check_user(UserId(u))?;
            UserId(u)
        }
        None => emb.append_mean_user(),
    };
    let initial = match initial {
        Some(p) => AttributeId(p),
        None => {
            write!(output, "Starting attribute id: ").and_then(|_| output.flush()).at("stdout")?;
            let mut line = String::new();
            input.read_line(&mut line).at("stdin")?;
            AttributeId(line.trim().parse().map_err(|_| Error::Config(format!("not an attribute id: {:?}", line.trim())))?)
        }
    };
    graph.check_attribute(initial)?;
    crate::chat::chat(&graph, &emb, &mut policy, user, initial, cfg.k, cfg.max_turns, &names, input, output)
}

pub fn serve(cfg: &RunConfig) -> Result<()> {
    let (graph, emb, policy, names) = interactive_model(cfg)?;
    let addr: SocketAddr = cfg.serve.addr.parse().map_err(|_| Error::Config(format!("bad address {:?}", cfg.serve.addr)))?;
    let model = Model::new(graph, emb, policy, names, cfg.k, cfg.max_turns);
    let state = AppState::new(model, Duration::from_secs(cfg.serve.idle_timeout_secs));
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Other(e.to_string()))?;
    rt.block_on(service::serve(state, addr)).map_err(|e| Error::Other(format!("server: {e}")))
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    match cli.command {
        Command::TrainFm(_) => train_fm(&cfg),
        Command::TrainPolicy { .. } => train_policy(&cfg),
        Command::Evaluate { .. } => {
            let summary = evaluate(&cfg)?;
            for agg in &summary.aggregate {
                let sr = agg.success.last().map(|s| s.mean).unwrap_or(0.0);
                println!("{:<16} SR@{} {:.3}  AT {:.2}", agg.policy, cfg.max_turns, sr, agg.average_turns.mean);
            }
            Ok(())
        }
        Command::Chat { user, initial, .. } => {
            let stdin = io::stdin();
            chat(&cfg, user, initial, stdin.lock(), io::stdout()).map(|_| ())
        }
        Command::Serve { .. } => serve(&cfg),
    }
}
