#![allow(dead_code)]

use cpr_core::rng::seeded;
use cpr_core::{EdgeRecord, EmbeddingTable, HeteroGraph, VertexCounts};
use rand::Rng;

/// One user, three items, three attributes; zero-based ids.
///
/// v1: p1 p2, v2: p1 p3, v3: p3, u1 interacted with v1.
pub fn g0() -> HeteroGraph {
    let edges = [
        EdgeRecord::belong_to(0, 0),
        EdgeRecord::belong_to(0, 1),
        EdgeRecord::belong_to(1, 0),
        EdgeRecord::belong_to(1, 2),
        EdgeRecord::belong_to(2, 2),
        EdgeRecord::interact(0, 0),
    ];
    HeteroGraph::build(VertexCounts::new(1, 3, 3), &edges).unwrap()
}

/// Random graph with at most `max_vertices` vertices, every kind present.
pub fn random_edges(seed: u64, max_vertices: u32) -> (VertexCounts, Vec<EdgeRecord>) {
    let mut rng = seeded(seed);
    let budget = max_vertices.max(3);
    let users = rng.random_range(1..=budget / 3);
    let items = rng.random_range(1..=budget / 3);
    let attributes = rng.random_range(1..=budget - users - items);
    let density: f64 = rng.random_range(0.05..0.5);

    let mut edges = Vec::new();
    for v in 0..items {
        for p in 0..attributes {
            if rng.random_bool(density) {
                edges.push(EdgeRecord::belong_to(v, p));
            }
        }
    }
    for u in 0..users {
        for v in 0..items {
            if rng.random_bool(density) {
                edges.push(EdgeRecord::interact(u, v));
            }
        }
        for p in 0..attributes {
            if rng.random_bool(density / 2.0) {
                edges.push(EdgeRecord::like(u, p));
            }
        }
        for w in u + 1..users {
            if rng.random_bool(density) {
                edges.push(EdgeRecord::friend(u, w));
            }
        }
    }
    (VertexCounts::new(users, items, attributes), edges)
}

pub fn random_graph(seed: u64, max_vertices: u32) -> HeteroGraph {
    let (counts, edges) = random_edges(seed, max_vertices);
    HeteroGraph::build(counts, &edges).unwrap()
}

pub fn random_embeddings(g: &HeteroGraph, dim: usize, scale: f64, seed: u64) -> EmbeddingTable {
    EmbeddingTable::random(dim, g.counts(), scale, &mut seeded(seed))
}
