#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use cpr::checkpoint::{self, PolicyMeta};
use cpr::core::policy::{state_dim, SIZE_BIN_UPPER};
use cpr::core::{Action, DqnConfig, EdgeRecord, EmbeddingTable, HeteroGraph, QNetwork, TrainConfig, VertexCounts};
use cpr::names::Names;

/// v1: p1 p2, v2: p1 p3, v3: p3, u1 interacted with v1. With `extra`, a
/// fourth attribute that no item carries.
pub fn g0(extra: bool) -> HeteroGraph {
    let edges = [
        EdgeRecord::belong_to(0, 0),
        EdgeRecord::belong_to(0, 1),
        EdgeRecord::belong_to(1, 0),
        EdgeRecord::belong_to(1, 2),
        EdgeRecord::belong_to(2, 2),
        EdgeRecord::interact(0, 0),
    ];
    HeteroGraph::build(VertexCounts::new(1, 3, 3 + extra as u32), &edges).unwrap()
}

pub const G0_TEXT: &str = "#vertices\tusers=1\titems=3\tattributes=3
belong_to\titem:0\tattribute:0
belong_to\titem:0\tattribute:1
belong_to\titem:1\tattribute:0
belong_to\titem:1\tattribute:2
belong_to\titem:2\tattribute:2
interact\tuser:0\titem:0
";

pub const G0_NAMES: &str = "attribute:0\tp1\nattribute:1\tp2\nattribute:2\tp3\nitem:0\tv1\nitem:1\tv2\nitem:2\tv3\n";

/// Scores v1 above v2, which makes p3 the higher-entropy question after
/// opening with p1.
pub fn g0_embeddings(attributes: usize) -> EmbeddingTable {
    EmbeddingTable::from_parts(1, vec![1.0], vec![0.4, 0.0, 0.0], vec![0.0; attributes]).unwrap()
}

/// Recommends once a single candidate is left, asks otherwise.
pub fn g0_policy() -> QNetwork {
    let input = state_dim(15);
    let mut params = vec![0.0; QNetwork::param_count(input, 1)];
    let single_bin = 4 * 15 + SIZE_BIN_UPPER.iter().position(|&hi| hi == 1).unwrap();
    params[single_bin] = 1.0; // w1
    params[input + 1 + Action::Recommend.index()] = 1.0; // w2
    params[input + 1 + 2 + Action::Ask.index()] = 0.5; // b2
    QNetwork::from_params(input, 1, params).unwrap()
}

pub fn g0_names() -> Names {
    Names::parse(G0_NAMES, Path::new("names.tsv")).unwrap()
}

/// Dataset, names, embeddings under `out/seed-0` and a policy checkpoint.
pub struct G0Files {
    pub data: PathBuf,
    pub names: PathBuf,
    pub out: PathBuf,
    pub policy: PathBuf,
}

pub fn write_g0_files(dir: &Path) -> G0Files {
    let data = dir.join("g0.tsv");
    fs::write(&data, G0_TEXT).unwrap();
    let names = dir.join("names.tsv");
    fs::write(&names, G0_NAMES).unwrap();
    let out = dir.join("run");
    fs::create_dir_all(out.join("seed-0")).unwrap();
    checkpoint::save_embeddings(&out.join("seed-0/embeddings.cpr-emb"), &g0_embeddings(3), &TrainConfig::default())
        .unwrap();
    let policy = dir.join("g0.cpr-pol");
    let net = g0_policy();
    let meta = PolicyMeta { input: net.input_dim(), hidden: 1, max_turns: 15, episodes: 0, dqn_config: DqnConfig::default() };
    checkpoint::save_policy(&policy, &net, &meta).unwrap();
    G0Files { data, names, out, policy }
}
