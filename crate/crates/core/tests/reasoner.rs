mod common;

use std::collections::BTreeSet;

use common::{random_embeddings, random_graph};
use cpr_core::reasoner::{count_entropy, rank_attributes, rank_items, weighted_entropy};
use cpr_core::rng::seeded;
use cpr_core::{AttributeId, EdgeRecord, EmbeddingTable, HeteroGraph, ItemId, SessionState, UserId};
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

const ENTROPY_MAX: f64 = 0.530_737_845_423_043; // log2(e) / e

fn sigma(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn score(emb: &EmbeddingTable, u: UserId, v: ItemId, accepted: &[AttributeId]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let vv = emb.item(v).unwrap();
    dot(emb.user(u).unwrap(), vv) + accepted.iter().map(|&p| dot(vv, emb.attribute(p).unwrap())).sum::<f64>()
}

fn direct_entropy(g: &HeteroGraph, emb: &EmbeddingTable, s: &SessionState, p: AttributeId) -> f64 {
    let accepted: Vec<_> = s.accepted().iter().collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for v in s.candidate_items().iter() {
        let w = sigma(score(emb, s.user(), v, &accepted));
        den += w;
        if g.items_with_attribute(p).unwrap().contains(v) {
            num += w;
        }
    }
    let x = num / den;
    if x == 0.0 || x == 1.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Opens a session on a random user and random itemful attribute, then
/// applies up to `steps` random legal updates. Every intermediate state is
/// passed to `visit`.
fn walk(g: &HeteroGraph, seed: u64, steps: usize, mut visit: impl FnMut(&SessionState)) {
    let mut rng = seeded(seed);
    let openers: Vec<AttributeId> = (0..g.attribute_count() as u32)
        .map(AttributeId)
        .filter(|&p| !g.items_with_attribute(p).unwrap().is_empty())
        .collect();
    let Some(&p0) = openers.choose(&mut rng) else { return };
    let user = UserId(rng.random_range(0..g.user_count() as u32));
    let mut s = SessionState::init(g, user, p0).unwrap();
    visit(&s);
    for _ in 0..steps {
        let cand: Vec<_> = s.candidate_attributes().iter().collect();
        let unasked: Vec<_> = (0..g.attribute_count() as u32).map(AttributeId).filter(|&p| !s.is_asked(p)).collect();
        match rng.random_range(0..5) {
            0 if !cand.is_empty() => s.accept_attribute(g, *cand.choose(&mut rng).unwrap()).unwrap(),
            1 if !cand.is_empty() => s.reject_attribute(*cand.choose(&mut rng).unwrap()).unwrap(),
            2 if !unasked.is_empty() => s.accept_any_attribute(g, *unasked.choose(&mut rng).unwrap()).unwrap(),
            3 if !unasked.is_empty() => s.reject_any_attribute(g, *unasked.choose(&mut rng).unwrap()).unwrap(),
            _ => {
                let mut items: Vec<_> = s.candidate_items().iter().collect();
                items.shuffle(&mut rng);
                items.truncate(rng.random_range(0..=items.len().min(3)));
                s.reject_items(&items).unwrap();
            }
        }
        s.advance_turn();
        visit(&s);
        if s.candidate_items().is_empty() {
            break;
        }
    }
}

proptest! {
    #[test]
    fn entropy_matches_direct_sum(seed in any::<u64>()) {
        let g = random_graph(seed, 40);
        let emb = random_embeddings(&g, 8, 1.0, seed ^ 1);
        walk(&g, seed, 8, |s| {
            if s.candidate_items().is_empty() {
                return;
            }
            let ranked = rank_attributes(&g, &emb, s).unwrap();
            for p in s.candidate_attributes().iter() {
                let h = weighted_entropy(&g, &emb, s, p).unwrap();
                assert!((h - direct_entropy(&g, &emb, s, p)).abs() < 1e-12);
                assert!((0.0..=ENTROPY_MAX).contains(&h));
                let listed = ranked.entries().iter().find(|e| e.0 == p).unwrap().1;
                assert!((listed - h).abs() < 1e-12);
            }
        });
    }

    #[test]
    fn rankings_are_ordered(seed in any::<u64>()) {
        let g = random_graph(seed, 40);
        let emb = random_embeddings(&g, 8, 1.0, seed ^ 2);
        walk(&g, seed, 6, |s| {
            if s.candidate_items().is_empty() {
                return;
            }
            for list in [
                rank_items(&emb, s).unwrap().entries().iter().map(|&(v, x)| (v.0, x)).collect::<Vec<_>>(),
                rank_attributes(&g, &emb, s).unwrap().entries().iter().map(|&(p, x)| (p.0, x)).collect(),
            ] {
                for w in list.windows(2) {
                    assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
                }
            }
        });
    }

    #[test]
    fn state_invariants_hold(seed in any::<u64>()) {
        let g = random_graph(seed, 50);
        let mut turn = 0;
        let mut rejected_once = BTreeSet::new();
        let mut prev_items: Option<Vec<ItemId>> = None;
        walk(&g, seed, 15, |s| {
            assert!(s.check_invariants(&g, 15));
            assert_eq!(s.turn(), turn);
            turn += 1;
            let items: Vec<_> = s.candidate_items().iter().collect();
            if let Some(prev) = &prev_items {
                assert!(items.iter().all(|v| prev.contains(v)));
            }
            rejected_once.extend(s.rejected_items().iter());
            assert!(items.iter().all(|v| !rejected_once.contains(v)));
            for p in s.candidate_attributes().iter() {
                assert!(!s.is_asked(p));
            }
            prev_items = Some(items);
        });
    }

    #[test]
    fn count_entropy_is_bounded(seed in any::<u64>()) {
        let g = random_graph(seed, 40);
        walk(&g, seed, 5, |s| {
            if s.candidate_items().is_empty() {
                return;
            }
            for p in 0..g.attribute_count() as u32 {
                let h = count_entropy(&g, s, AttributeId(p)).unwrap();
                assert!((0.0..=ENTROPY_MAX).contains(&h));
            }
        });
    }

    /// Listing the same edges in a different order changes nothing.
    #[test]
    fn edge_order_is_irrelevant(seed in any::<u64>()) {
        let (counts, mut edges) = common::random_edges(seed, 40);
        let g = HeteroGraph::build(counts, &edges).unwrap();
        edges.shuffle(&mut seeded(seed ^ 7));
        let edges: Vec<EdgeRecord> = edges.into_iter().map(|e| EdgeRecord::new(e.relation, e.tail, e.head)).collect();
        let h = HeteroGraph::build(counts, &edges).unwrap();
        let emb = random_embeddings(&g, 8, 1.0, seed);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        walk(&g, seed, 6, |s| if !s.candidate_items().is_empty() {
            a.push((rank_items(&emb, s).unwrap(), rank_attributes(&g, &emb, s).unwrap()));
        });
        walk(&h, seed, 6, |s| if !s.candidate_items().is_empty() {
            b.push((rank_items(&emb, s).unwrap(), rank_attributes(&h, &emb, s).unwrap()));
        });
        prop_assert_eq!(a, b);
    }
}

#[test]
fn entropy_boundaries_are_exactly_zero() {
    let g = common::g0();
    let emb = random_embeddings(&g, 4, 1.0, 3);
    // p2 after accepting p1 covers v1 only; after rejecting v2 it covers all
    let mut s = SessionState::init(&g, UserId(0), AttributeId(0)).unwrap();
    assert!(weighted_entropy(&g, &emb, &s, AttributeId(1)).unwrap() > 0.0);
    s.reject_items(&[ItemId(1)]).unwrap();
    assert_eq!(weighted_entropy(&g, &emb, &s, AttributeId(1)).unwrap(), 0.0);
    assert_eq!(weighted_entropy(&g, &emb, &s, AttributeId(2)).unwrap(), 0.0);
}
