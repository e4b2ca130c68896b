//! The stages behind the subcommands: data preparation, FM training,
//! policy training and batch evaluation. Every stage is a pure function
//! of its inputs and seed.

use std::path::Path;

use cpr_core::data::{generate_synthetic, prune_rare_attributes, split_interactions, InteractionSplit, Pruned};
use cpr_core::embed::{collect_training_corpus, train_embeddings};
use cpr_core::engine::{episode_specs, simulate_episode, train_policy, TrainingRun, TrainingSetup};
use cpr_core::metrics::{relative_success, MetricReport};
use cpr_core::policy::state_dim;
use cpr_core::rng::stream;
use cpr_core::{AttributeId, DqnConfig, EmbeddingTable, EpisodeLog, EpisodeSpec, HeteroGraph, PolicyKind, QNetwork, Rewards, TrainConfig};
use rayon::prelude::*;

use crate::checkpoint::{self, PolicyMeta};
use crate::config::{DataConfig, RunConfig};
use crate::edgelist;
use crate::error::{Error, Result};

const STREAM_SPLIT: u64 = 1;
const STREAM_CORPUS: u64 = 2;
const STREAM_FM: u64 = 3;
const STREAM_DQN: u64 = 4;
const STREAM_EVAL: u64 = 5;

pub const EMBEDDINGS_FILE: &str = "embeddings.cpr-emb";
pub const POLICY_FILE: &str = "policy.cpr-pol";
pub const FM_LOSS_FILE: &str = "fm_loss.csv";
pub const RETURNS_FILE: &str = "returns.csv";

#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: HeteroGraph,
    pub split: InteractionSplit,
    /// Original ids of the attributes that survived pruning.
    pub kept_attributes: Vec<AttributeId>,
}

/// Loads or generates the graph and prunes rare attributes.
pub fn load_graph(cfg: &DataConfig) -> Result<Pruned> {
    let graph = match (&cfg.path, &cfg.synthetic) {
        (Some(path), _) => edgelist::load_graph(path)?,
        (None, Some(spec)) => generate_synthetic(spec)?.graph,
        (None, None) => return Err(Error::Config("no dataset: pass --data or --synthetic".into())),
    };
    Ok(prune_rare_attributes(&graph, cfg.min_attribute_freq)?)
}

/// [`load_graph`], then a seeded split of the interactions.
pub fn prepare_data(cfg: &DataConfig, seed: u64) -> Result<Dataset> {
    let pruned = load_graph(cfg)?;
    let interactions = pruned.graph.interactions();
    let split = split_interactions(&interactions, cfg.split, &mut stream(seed, STREAM_SPLIT))?;
    Ok(Dataset { graph: pruned.graph, split, kept_attributes: pruned.kept })
}

/// Trains embeddings on the train split; returns the table and the
/// per-epoch objective.
pub fn fit_embeddings(ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<(EmbeddingTable, Vec<f64>)> {
    let report = collect_training_corpus(&ds.graph, &ds.split.train, &mut stream(seed, STREAM_CORPUS))?;
    if report.corpus.is_empty() {
        return Err(Error::Other("training split produced no samples".into()));
    }
    Ok(train_embeddings(ds.graph.counts(), &report.corpus, cfg, &mut stream(seed, STREAM_FM))?)
}

pub fn fit_policy(
    ds: &Dataset,
    emb: &EmbeddingTable,
    cfg: &DqnConfig,
    setup: TrainingSetup,
    seed: u64,
) -> Result<TrainingRun> {
    Ok(train_policy(&ds.graph, emb, &ds.split.validation, cfg, setup, &mut stream(seed, STREAM_DQN))?)
}

/// Episode specs over the test split, one per interaction.
pub fn test_specs(ds: &Dataset, k: usize, max_turns: u32, seed: u64) -> Result<Vec<EpisodeSpec>> {
    if ds.split.test.is_empty() {
        return Err(Error::Other("test split is empty".into()));
    }
    let specs = episode_specs(&ds.graph, &ds.split.test, k, max_turns, &mut stream(seed, STREAM_EVAL))?;
    if specs.is_empty() {
        return Err(Error::Other("no test interaction has an item with attributes".into()));
    }
    Ok(specs)
}

/// Runs every spec under `policy`, in parallel, returning logs in spec
/// order.
pub fn run_specs(
    g: &HeteroGraph,
    emb: &EmbeddingTable,
    policy: &PolicyKind,
    specs: &[EpisodeSpec],
    rewards: &Rewards,
) -> Result<Vec<EpisodeLog>> {
    specs
        .par_iter()
        .map(|spec| simulate_episode(g, emb, &mut &*policy, spec, rewards))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(Error::from)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyRun {
    pub name: String,
    pub logs: Vec<EpisodeLog>,
    pub report: MetricReport,
    pub relative: Option<Vec<f64>>,
}

/// Evaluates named policies on the same specs; when `reference` names one
/// of them, every run also gets success rates relative to it.
pub fn evaluate_policies(
    g: &HeteroGraph,
    emb: &EmbeddingTable,
    policies: &[(String, PolicyKind)],
    specs: &[EpisodeSpec],
    rewards: &Rewards,
    reference: Option<&str>,
) -> Result<Vec<PolicyRun>> {
    let max_turns = specs.first().map(|s| s.max_turns).ok_or(Error::Other("no episodes to evaluate".into()))?;
    let mut runs = Vec::with_capacity(policies.len());
    for (name, policy) in policies {
        let logs = run_specs(g, emb, policy, specs, rewards)?;
        let outcomes: Vec<Option<u32>> = logs.iter().map(|l| l.success_turn()).collect();
        let report = MetricReport::from_outcomes(&outcomes, max_turns)?;
        runs.push(PolicyRun { name: name.clone(), logs, report, relative: None });
    }
    if let Some(reference) = reference {
        let base = runs
            .iter()
            .find(|r| r.name == reference)
            .map(|r| r.report.success.clone())
            .ok_or_else(|| Error::Config(format!("reference policy {reference:?} is not being evaluated")))?;
        for run in &mut runs {
            run.relative = Some(relative_success(&run.report.success, &base)?);
        }
    }
    Ok(runs)
}

/// Resolves a policy argument: a built-in name, or a path to a policy
/// checkpoint. `scpr` means the checkpoint in `seed_dir`.
pub fn resolve_policy(spec: &str, seed_dir: &Path, max_turns: u32) -> Result<(String, PolicyKind)> {
    let load = |path: &Path| -> Result<QNetwork> {
        let (net, meta) = checkpoint::load_policy(path)?;
        if meta.input != state_dim(max_turns) {
            return Err(Error::Config(format!(
                "{} was trained for {} turns, not {max_turns}",
                path.display(),
                meta.max_turns
            )));
        }
        Ok(net)
    };
    Ok(match spec {
        "abs-greedy" => (spec.into(), PolicyKind::AbsGreedy),
        "max-entropy" => (spec.into(), PolicyKind::MaxEntropy),
        "scpr" => (spec.into(), PolicyKind::Scpr(load(&seed_dir.join(POLICY_FILE))?)),
        path => {
            let path = Path::new(path);
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scpr").to_string();
            (name, PolicyKind::Scpr(load(path)?))
        }
    })
}

pub fn policy_meta(net: &QNetwork, cfg: &RunConfig, dqn: &DqnConfig) -> PolicyMeta {
    PolicyMeta {
        input: net.input_dim(),
        hidden: net.hidden_dim(),
        max_turns: cfg.max_turns,
        episodes: cfg.training.episodes,
        dqn_config: dqn.clone(),
    }
}
