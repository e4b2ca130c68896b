//! Session state and the reasoning/transition steps of a conversation.
//!
//! A session walks over attribute vertices. The confirmed attributes form
//! the path; candidate items are the items carrying every confirmed
//! attribute (minus anything the user turned down), and candidate
//! attributes are the neighbors of the path tip not yet asked about.

use alloc::vec;
use alloc::vec::Vec;

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::ids::{AttributeId, AttributeSet, ItemId, ItemSet, UserId};
use crate::math::{neg_x_log2_x, sigmoid};

#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    user: UserId,
    path: Vec<AttributeId>,
    accepted: AttributeSet,
    rejected_attrs: AttributeSet,
    rejected_items: ItemSet,
    candidate_items: ItemSet,
    candidate_attrs: AttributeSet,
    turn: u32,
}

impl SessionState {
    /// Opens a session from the user's initial attribute `p0`.
    pub fn init(g: &HeteroGraph, user: UserId, p0: AttributeId) -> Result<Self> {
        let items = g.items_with_attribute(p0)?;
        if items.is_empty() {
            return Err(Error::AttributeWithoutItems(p0));
        }
        let accepted: AttributeSet = [p0].into_iter().collect();
        let candidate_attrs = g.adjacent_attributes(p0)?.difference(&accepted);
        Ok(Self {
            user,
            path: vec![p0],
            accepted,
            rejected_attrs: AttributeSet::new(),
            rejected_items: ItemSet::new(),
            candidate_items: items.clone(),
            candidate_attrs,
            turn: 0,
        })
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    /// Confirmed attributes in the order they were confirmed.
    pub fn path(&self) -> &[AttributeId] {
        &self.path
    }

    pub fn tip(&self) -> AttributeId {
        *self.path.last().expect("path always holds the initial attribute")
    }

    pub fn accepted(&self) -> &AttributeSet {
        &self.accepted
    }

    pub fn rejected_attributes(&self) -> &AttributeSet {
        &self.rejected_attrs
    }

    pub fn rejected_items(&self) -> &ItemSet {
        &self.rejected_items
    }

    pub fn candidate_items(&self) -> &ItemSet {
        &self.candidate_items
    }

    pub fn candidate_attributes(&self) -> &AttributeSet {
        &self.candidate_attrs
    }

    /// Attributes already confirmed or turned down.
    pub fn is_asked(&self, p: AttributeId) -> bool {
        self.accepted.contains(p) || self.rejected_attrs.contains(p)
    }

    /// Number of turns completed so far.
    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn advance_turn(&mut self) {
        self.turn += 1;
    }

    /// Confirms a candidate attribute and walks the path to it.
    pub fn accept_attribute(&mut self, g: &HeteroGraph, p: AttributeId) -> Result<()> {
        if !self.candidate_attrs.contains(p) {
            return Err(Error::NotCandidateAttribute(p));
        }
        self.accept_any_attribute(g, p)
    }

    /// Confirms any not-yet-asked attribute, ignoring the adjacency
    /// constraint. Used by policies that search the whole attribute space.
    pub fn accept_any_attribute(&mut self, g: &HeteroGraph, p: AttributeId) -> Result<()> {
        let items = g.items_with_attribute(p)?;
        if self.is_asked(p) {
            return Err(Error::AlreadyAsked(p));
        }
        let adjacent = g.adjacent_attributes(p)?;
        self.path.push(p);
        self.accepted.insert(p);
        self.candidate_items = self
            .candidate_items
            .intersection(items)
            .difference(&self.rejected_items);
        self.candidate_attrs = adjacent
            .difference(&self.accepted)
            .difference(&self.rejected_attrs);
        Ok(())
    }

    /// Drops a candidate attribute the user turned down. The path stays put.
    pub fn reject_attribute(&mut self, p: AttributeId) -> Result<()> {
        if !self.candidate_attrs.contains(p) {
            return Err(Error::NotCandidateAttribute(p));
        }
        self.candidate_attrs.remove(p);
        self.rejected_attrs.insert(p);
        Ok(())
    }

    /// Counterpart of [`accept_any_attribute`](Self::accept_any_attribute).
    pub fn reject_any_attribute(&mut self, g: &HeteroGraph, p: AttributeId) -> Result<()> {
        g.check_attribute(p)?;
        if self.is_asked(p) {
            return Err(Error::AlreadyAsked(p));
        }
        self.candidate_attrs.remove(p);
        self.rejected_attrs.insert(p);
        Ok(())
    }

    /// Removes recommended items the user turned down.
    pub fn reject_items(&mut self, items: &[ItemId]) -> Result<()> {
        if let Some(&v) = items.iter().find(|&&v| !self.candidate_items.contains(v)) {
            return Err(Error::NotCandidateItem(v));
        }
        for &v in items {
            self.candidate_items.remove(v);
            self.rejected_items.insert(v);
        }
        Ok(())
    }

    /// Checks every structural invariant against the graph.
    pub fn check_invariants(&self, g: &HeteroGraph, max_turns: u32) -> bool {
        let path_set: AttributeSet = self.path.iter().copied().collect();
        let Ok(adjacent) = g.adjacent_attributes(self.tip()) else {
            return false;
        };
        let Ok(allowed) = g.candidate_items(&self.accepted) else {
            return false;
        };
        path_set == self.accepted
            && path_set.len() == self.path.len()
            && self.accepted.is_disjoint(&self.rejected_attrs)
            && self.candidate_items.is_subset(&allowed.difference(&self.rejected_items))
            && self.candidate_attrs == adjacent.difference(&self.accepted).difference(&self.rejected_attrs)
            && self.turn <= max_turns
    }
}

/// Ids ranked by descending score; equal scores fall back to ascending id.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredList<T> {
    entries: Vec<(T, f64)>,
}

impl<T: Copy + Ord> ScoredList<T> {
    pub fn new(mut entries: Vec<(T, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self { entries }
    }

    pub fn entries(&self) -> &[(T, f64)] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = T> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn top(&self, k: usize) -> Vec<T> {
        self.ids().take(k).collect()
    }

    pub fn first(&self) -> Option<T> {
        self.entries.first().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scores every candidate item with the bilinear item score.
pub fn rank_items(emb: &EmbeddingTable, state: &SessionState) -> Result<ScoredList<ItemId>> {
    if state.candidate_items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let entries = state
        .candidate_items
        .iter()
        .map(|v| Ok((v, emb.score_item(state.user, v, &state.accepted)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoredList::new(entries))
}

/// σ(score) of each candidate item, in ascending item order.
fn item_weights(emb: &EmbeddingTable, state: &SessionState) -> Result<Vec<(ItemId, f64)>> {
    state
        .candidate_items
        .iter()
        .map(|v| Ok((v, sigmoid(emb.score_item(state.user, v, &state.accepted)?))))
        .collect()
}

/// Weighted entropy of a candidate attribute: `-x log2 x` where `x` is the
/// σ-weighted share of candidate items carrying the attribute. Zero when no
/// candidate carries it, and zero when every candidate does.
pub fn weighted_entropy(g: &HeteroGraph, emb: &EmbeddingTable, state: &SessionState, p: AttributeId) -> Result<f64> {
    if state.candidate_items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if !state.candidate_attrs.contains(p) {
        return Err(Error::NotCandidateAttribute(p));
    }
    let weights = item_weights(emb, state)?;
    let mut covered = 0.0;
    let mut total = 0.0;
    let mut any = false;
    for &(v, w) in &weights {
        total += w;
        if g.attributes_of_item(v)?.contains(p) {
            covered += w;
            any = true;
        }
    }
    if !any {
        return Ok(0.0);
    }
    Ok(neg_x_log2_x(covered / total))
}

/// Candidate attributes ranked by weighted entropy.
pub fn rank_attributes(g: &HeteroGraph, emb: &EmbeddingTable, state: &SessionState) -> Result<ScoredList<AttributeId>> {
    if state.candidate_attrs.is_empty() {
        return Ok(ScoredList::new(Vec::new()));
    }
    if state.candidate_items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let weights = item_weights(emb, state)?;
    let cand = state.candidate_attrs.as_slice();
    let mut covered = vec![0.0; cand.len()];
    let mut hit = vec![false; cand.len()];
    let mut total = 0.0;
    for &(v, w) in &weights {
        total += w;
        // both lists are sorted; walk them together
        let attrs = g.attributes_of_item(v)?.as_slice();
        let (mut i, mut j) = (0, 0);
        while i < attrs.len() && j < cand.len() {
            match attrs[i].cmp(&cand[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    covered[j] += w;
                    hit[j] = true;
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    let entries = cand
        .iter()
        .zip(covered.iter().zip(&hit))
        .map(|(&p, (&c, &h))| (p, if h { neg_x_log2_x(c / total) } else { 0.0 }))
        .collect();
    Ok(ScoredList::new(entries))
}

/// Unweighted entropy of an arbitrary attribute over the candidate items:
/// `-x log2 x` with `x` the fraction of candidates carrying it.
pub fn count_entropy(g: &HeteroGraph, state: &SessionState, p: AttributeId) -> Result<f64> {
    let n = state.candidate_items.len();
    if n == 0 {
        return Err(Error::EmptyCandidates);
    }
    let covered = state
        .candidate_items
        .intersection(g.items_with_attribute(p)?)
        .len();
    Ok(neg_x_log2_x(covered as f64 / n as f64))
}
