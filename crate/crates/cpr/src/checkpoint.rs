//! Versioned checkpoint files.
//!
//! Layout: a magic line, one line of JSON metadata, then the parameters as
//! little-endian `f64`. The same inputs always produce the same bytes.

use std::fs;
use std::path::Path;

use cpr_core::{DqnConfig, EmbeddingTable, QNetwork, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const EMBEDDING_MAGIC: &str = "CPR-EMB-1";
pub const POLICY_MAGIC: &str = "CPR-POL-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub dim: usize,
    pub users: usize,
    pub items: usize,
    pub attributes: usize,
    pub train_config: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub input: usize,
    pub hidden: usize,
    pub max_turns: u32,
    pub episodes: usize,
    pub dqn_config: DqnConfig,
}

fn encode<M: Serialize>(magic: &str, meta: &M, chunks: &[&[f64]]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(magic.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(&serde_json::to_vec(meta)?);
    out.push(b'\n');
    for x in chunks.iter().flat_map(|c| c.iter()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

fn decode<M: DeserializeOwned>(magic: &str, bytes: &[u8], path: &Path) -> Result<(M, Vec<f64>)> {
    let bad = |m: &str| Error::format(path, m);
    let mut parts = bytes.splitn(3, |&b| b == b'\n');
    if parts.next() != Some(magic.as_bytes()) {
        return Err(bad(&format!("not a {magic} file")));
    }
    let meta = parts.next().ok_or_else(|| bad("missing metadata line"))?;
    let meta: M = serde_json::from_slice(meta).map_err(|e| bad(&format!("metadata: {e}")))?;
    let body = parts.next().unwrap_or_default();
    if body.len() % 8 != 0 {
        return Err(bad("parameter block is not a whole number of f64 values"));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((meta, values))
}

pub fn encode_embeddings(emb: &EmbeddingTable, cfg: &TrainConfig) -> Result<Vec<u8>> {
    let meta = EmbeddingMeta {
        dim: emb.dim(),
        users: emb.user_count(),
        items: emb.item_count(),
        attributes: emb.attribute_count(),
        train_config: cfg.clone(),
    };
    encode(EMBEDDING_MAGIC, &meta, &[emb.users_flat(), emb.items_flat(), emb.attributes_flat()])
}

pub fn decode_embeddings(bytes: &[u8], path: &Path) -> Result<(EmbeddingTable, EmbeddingMeta)> {
    let (meta, mut values): (EmbeddingMeta, _) = decode(EMBEDDING_MAGIC, bytes, path)?;
    let expected = meta.dim * (meta.users + meta.items + meta.attributes);
    if values.len() != expected {
        return Err(Error::format(path, format!("expected {expected} values, found {}", values.len())));
    }
    let attributes = values.split_off(meta.dim * (meta.users + meta.items));
    let items = values.split_off(meta.dim * meta.users);
    let table = EmbeddingTable::from_parts(meta.dim, values, items, attributes)?;
    Ok((table, meta))
}

pub fn save_embeddings(path: &Path, emb: &EmbeddingTable, cfg: &TrainConfig) -> Result<()> {
    fs::write(path, encode_embeddings(emb, cfg)?).at(path)
}

pub fn load_embeddings(path: &Path) -> Result<(EmbeddingTable, EmbeddingMeta)> {
    decode_embeddings(&fs::read(path).at(path)?, path)
}

pub fn encode_policy(net: &QNetwork, meta: &PolicyMeta) -> Result<Vec<u8>> {
    encode(POLICY_MAGIC, meta, &[net.params()])
}

pub fn decode_policy(bytes: &[u8], path: &Path) -> Result<(QNetwork, PolicyMeta)> {
    let (meta, values): (PolicyMeta, _) = decode(POLICY_MAGIC, bytes, path)?;
    let net = QNetwork::from_params(meta.input, meta.hidden, values)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok((net, meta))
}

pub fn save_policy(path: &Path, net: &QNetwork, meta: &PolicyMeta) -> Result<()> {
    fs::write(path, encode_policy(net, meta)?).at(path)
}

pub fn load_policy(path: &Path) -> Result<(QNetwork, PolicyMeta)> {
    decode_policy(&fs::read(path).at(path)?, path)
}
