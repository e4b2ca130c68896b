//! Optional display names for items and attributes.
//!
//! Sidecar file: one `kind:index<TAB>name` line per named vertex, e.g.
//! `attribute:7<TAB>jazz`. Unnamed vertices fall back to their id.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use cpr_core::{AttributeId, ItemId, VertexKind};

use crate::error::{Error, IoContext, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Names {
    items: HashMap<u32, String>,
    attributes: HashMap<u32, String>,
}

impl Names {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut names = Names::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| Error::Parse { path: path.to_path_buf(), line: i + 1, message: m.into() };
            let (vertex, name) = line.split_once('\t').ok_or_else(|| err("expected `kind:index<TAB>name`"))?;
            let (kind, index) = vertex.split_once(':').ok_or_else(|| err("expected `kind:index`"))?;
            let index: u32 = index.parse().map_err(|_| err("bad index"))?;
            let map = match kind {
                "item" => &mut names.items,
                "attribute" => &mut names.attributes,
                _ => return Err(err("only item and attribute names are supported")),
            };
            map.insert(index, name.trim().to_string());
        }
        Ok(names)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).at(path)?, path)
    }

    pub fn item(&self, v: ItemId) -> String {
        self.items.get(&v.0).cloned().unwrap_or_else(|| v.to_string())
    }

    pub fn attribute(&self, p: AttributeId) -> String {
        self.attributes.get(&p.0).cloned().unwrap_or_else(|| p.to_string())
    }

    pub fn get(&self, kind: VertexKind, index: u32) -> Option<&str> {
        match kind {
            VertexKind::Item => self.items.get(&index),
            VertexKind::Attribute => self.attributes.get(&index),
            VertexKind::User => None,
        }
        .map(String::as_str)
    }
}
