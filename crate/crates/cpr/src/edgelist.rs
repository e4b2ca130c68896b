//! Tab-separated edge-list files.
//!
//! ```text
//! #vertices<TAB>users=1<TAB>items=3<TAB>attributes=3
//! interact<TAB>user:0<TAB>item:0
//! belong_to<TAB>item:0<TAB>attribute:0
//! ```
//!
//! Relation names are matched case-insensitively. Blank lines and further
//! `#` lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cpr_core::data::Interaction;
use cpr_core::{EdgeRecord, HeteroGraph, Relation, VertexCounts, VertexId, VertexKind};

use crate::error::{Error, IoContext, Result};

const HEADER_TAG: &str = "#vertices";

fn parse_header(line: &str) -> Option<VertexCounts> {
    let mut fields = line.split('\t');
    if fields.next()?.trim() != HEADER_TAG {
        return None;
    }
    let mut get = |key: &str| -> Option<u32> {
        let (k, v) = fields.next()?.trim().split_once('=')?;
        (k == key).then(|| v.parse().ok()).flatten()
    };
    let counts = VertexCounts::new(get("users")?, get("items")?, get("attributes")?);
    fields.next().is_none().then_some(counts)
}

fn parse_vertex(token: &str) -> Option<VertexId> {
    let (kind, index) = token.trim().split_once(':')?;
    let kind = match kind.to_ascii_lowercase().as_str() {
        "user" => VertexKind::User,
        "item" => VertexKind::Item,
        "attribute" => VertexKind::Attribute,
        _ => return None,
    };
    Some(VertexId { kind, index: index.parse().ok()? })
}

fn parse_record(line: &str) -> std::result::Result<EdgeRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
    }
    let relation =
        Relation::from_name(fields[0].trim()).ok_or_else(|| format!("unknown relation {:?}", fields[0]))?;
    let head = parse_vertex(fields[1]).ok_or_else(|| format!("bad vertex {:?}", fields[1]))?;
    let tail = parse_vertex(fields[2]).ok_or_else(|| format!("bad vertex {:?}", fields[2]))?;
    Ok(EdgeRecord::new(relation, head, tail))
}

/// Parses edge-list text; `path` is only used in error messages.
pub fn parse_edge_list(text: &str, path: &Path) -> Result<HeteroGraph> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let counts = match lines.next() {
        Some((_, first)) => parse_header(first)
            .ok_or_else(|| err(1, format!("expected header `{HEADER_TAG}\\tusers=N\\titems=N\\tattributes=N`")))?,
        None => return Err(err(1, "empty file".into())),
    };

    let mut records = Vec::new();
    let mut line_of = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        records.push(parse_record(line).map_err(|m| err(no, m))?);
        line_of.push(no);
    }

    HeteroGraph::build(counts, &records).map_err(|e| {
        use cpr_core::Error as E;
        match e {
            E::SelfLoop { index, .. }
            | E::KindMismatch { index, .. }
            | E::DuplicateEdge { index, .. }
            | E::VertexOutOfRange { index, .. } => err(line_of[index], e.to_string()),
            other => Error::Core(other),
        }
    })
}

pub fn write_edge_list(g: &HeteroGraph) -> String {
    let c = g.counts();
    let mut out = format!("{HEADER_TAG}\tusers={}\titems={}\tattributes={}\n", c.users, c.items, c.attributes);
    for e in g.edges() {
        let _ = writeln!(out, "{}\t{}\t{}", e.relation.name(), e.head, e.tail);
    }
    out
}

pub fn load_graph(path: &Path) -> Result<HeteroGraph> {
    let text = fs::read_to_string(path).at(path)?;
    parse_edge_list(&text, path)
}

/// Loads a dataset; the interaction list is every `interact` edge.
pub fn load_dataset(path: &Path) -> Result<(HeteroGraph, Vec<Interaction>)> {
    let g = load_graph(path)?;
    let interactions = g.interactions();
    Ok((g, interactions))
}

pub fn save_graph(g: &HeteroGraph, path: &Path) -> Result<()> {
    fs::write(path, write_edge_list(g)).at(path)
}
