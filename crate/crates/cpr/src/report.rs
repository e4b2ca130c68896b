//! Evaluation reports, episode logs and training curves.

use std::fmt::Write as _;

use cpr_core::engine::{Move, Outcome};
use cpr_core::metrics::MetricReport;
use cpr_core::{Answer, EpisodeLog};
use serde::{Deserialize, Serialize};

use crate::pipeline::PolicyRun;

/// One evaluated policy under one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub policy: String,
    #[serde(flatten)]
    pub metrics: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relative_success: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub policies: Vec<PolicyResult>,
}

impl SeedResult {
    pub fn from_runs(seed: u64, runs: &[PolicyRun]) -> Self {
        let policies = runs
            .iter()
            .map(|r| PolicyResult { policy: r.name.clone(), metrics: r.report.clone(), relative_success: r.relative.clone() })
            .collect();
        Self { seed, policies }
    }
}

/// Mean and sample standard deviation; the deviation is absent for a
/// single value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Spread {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub policy: String,
    /// Indexed by turn, starting at turn 1.
    pub success: Vec<Spread>,
    pub average_turns: Spread,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub k: usize,
    pub max_turns: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<String>,
    pub runs: Vec<SeedResult>,
    pub aggregate: Vec<Aggregate>,
}

impl Summary {
    pub fn new(k: usize, max_turns: u32, reference: Option<String>, runs: Vec<SeedResult>) -> Self {
        let mut aggregate = Vec::new();
        if let Some(first) = runs.first() {
            for (i, p) in first.policies.iter().enumerate() {
                let per_seed: Vec<&PolicyResult> = runs.iter().filter_map(|r| r.policies.get(i)).collect();
                let success = (0..p.metrics.success.len())
                    .map(|t| Spread::of(&per_seed.iter().map(|r| r.metrics.success[t]).collect::<Vec<_>>()))
                    .collect();
                let turns: Vec<f64> = per_seed.iter().map(|r| r.metrics.average_turns).collect();
                aggregate.push(Aggregate { policy: p.policy.clone(), success, average_turns: Spread::of(&turns) });
            }
        }
        Self { k, max_turns, reference, runs, aggregate }
    }

    /// Long-format CSV: `seed,policy,metric,t,value`, where `metric` is
    /// `sr`, `sr_rel` or `at` (the last with an empty `t`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,policy,metric,t,value\n");
        for run in &self.runs {
            for p in &run.policies {
                for (i, sr) in p.metrics.success.iter().enumerate() {
                    let _ = writeln!(out, "{},{},sr,{},{}", run.seed, p.policy, i + 1, sr);
                }
                if let Some(rel) = &p.relative_success {
                    for (i, d) in rel.iter().enumerate() {
                        let _ = writeln!(out, "{},{},sr_rel,{},{}", run.seed, p.policy, i + 1, d);
                    }
                }
                let _ = writeln!(out, "{},{},at,,{}", run.seed, p.policy, p.metrics.average_turns);
            }
        }
        out
    }
}

#[derive(Serialize)]
struct TurnLine<'a> {
    episode_id: usize,
    seed: u64,
    policy: &'a str,
    user: u32,
    initial: u32,
    turn: u32,
    action: &'static str,
    payload: Vec<u32>,
    answer: Answer,
    reward: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<Outcome>,
}

/// JSON lines, one per turn; the last turn of each episode carries the
/// outcome. Episode ids follow the order of `logs`.
pub fn episode_lines(seed: u64, policy: &str, logs: &[EpisodeLog]) -> String {
    let mut out = String::new();
    for (episode_id, log) in logs.iter().enumerate() {
        let last = log.turns.len().saturating_sub(1);
        for (i, t) in log.turns.iter().enumerate() {
            let payload = match &t.mv {
                Move::Ask(p) => vec![p.0],
                Move::Recommend(items) => items.iter().map(|v| v.0).collect(),
            };
            let line = TurnLine {
                episode_id,
                seed,
                policy,
                user: log.user.0,
                initial: log.initial.0,
                turn: t.turn,
                action: t.action().name(),
                payload,
                answer: t.answer,
                reward: t.reward,
                outcome: (i == last).then_some(log.outcome),
            };
            out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
            out.push('\n');
        }
    }
    out
}

pub fn loss_curve_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, l);
    }
    out
}

pub fn returns_csv(returns: &[f64], losses: &[Option<f64>]) -> String {
    let mut out = String::from("episode,return,td_loss\n");
    for (i, r) in returns.iter().enumerate() {
        let loss = losses.get(i).copied().flatten().map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", i + 1, r, loss);
    }
    out
}
