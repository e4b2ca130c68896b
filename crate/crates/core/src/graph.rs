//! The user–item–attribute graph.
//!
//! Edges are undirected. Relation kinds are validated on load and kept for
//! serialization, but reasoning only looks at whether two vertices are linked.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::ids::{AttributeId, AttributeSet, IdSet, ItemId, ItemSet, UserId, VertexId, VertexKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Relation {
    /// user – item
    Interact,
    /// user – user
    Friend,
    /// user – attribute
    Like,
    /// item – attribute
    BelongTo,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::Interact,
        Relation::Friend,
        Relation::Like,
        Relation::BelongTo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Interact => "interact",
            Relation::Friend => "friend",
            Relation::Like => "like",
            Relation::BelongTo => "belong_to",
        }
    }

    /// Parses a relation name, ignoring ASCII case.
    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(name))
    }

    /// Endpoint kinds in canonical (head, tail) order.
    pub fn endpoints(self) -> (VertexKind, VertexKind) {
        match self {
            Relation::Interact => (VertexKind::User, VertexKind::Item),
            Relation::Friend => (VertexKind::User, VertexKind::User),
            Relation::Like => (VertexKind::User, VertexKind::Attribute),
            Relation::BelongTo => (VertexKind::Item, VertexKind::Attribute),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeRecord {
    pub relation: Relation,
    pub head: VertexId,
    pub tail: VertexId,
}

impl EdgeRecord {
    pub fn new(relation: Relation, head: VertexId, tail: VertexId) -> Self {
        Self { relation, head, tail }
    }

    pub fn interact(user: u32, item: u32) -> Self {
        Self::new(Relation::Interact, VertexId::user(user), VertexId::item(item))
    }

    pub fn friend(a: u32, b: u32) -> Self {
        Self::new(Relation::Friend, VertexId::user(a), VertexId::user(b))
    }

    pub fn like(user: u32, attribute: u32) -> Self {
        Self::new(Relation::Like, VertexId::user(user), VertexId::attribute(attribute))
    }

    pub fn belong_to(item: u32, attribute: u32) -> Self {
        Self::new(Relation::BelongTo, VertexId::item(item), VertexId::attribute(attribute))
    }

    /// Orders the endpoints canonically for the relation, or `None` if the
    /// endpoint kinds do not fit it.
    fn canonical(self) -> Option<Self> {
        let (h, t) = self.relation.endpoints();
        if (self.head.kind, self.tail.kind) == (h, t) {
            if h == t && self.tail < self.head {
                return Some(Self { head: self.tail, tail: self.head, ..self });
            }
            Some(self)
        } else if (self.tail.kind, self.head.kind) == (h, t) {
            Some(Self { head: self.tail, tail: self.head, ..self })
        } else {
            None
        }
    }
}

impl fmt::Display for EdgeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.relation, self.head, self.tail)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VertexCounts {
    pub users: u32,
    pub items: u32,
    pub attributes: u32,
}

impl VertexCounts {
    pub fn new(users: u32, items: u32, attributes: u32) -> Self {
        Self { users, items, attributes }
    }

    pub fn of(&self, kind: VertexKind) -> u32 {
        match kind {
            VertexKind::User => self.users,
            VertexKind::Item => self.items,
            VertexKind::Attribute => self.attributes,
        }
    }

    pub fn total(&self) -> u64 {
        self.users as u64 + self.items as u64 + self.attributes as u64
    }
}

/// Immutable tripartite graph with a per-vertex adjacency index
/// partitioned by neighbor kind.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGraph {
    counts: VertexCounts,
    edges: Vec<EdgeRecord>,
    user_items: Vec<ItemSet>,
    user_friends: Vec<IdSet<UserId>>,
    user_attributes: Vec<AttributeSet>,
    item_users: Vec<IdSet<UserId>>,
    item_attributes: Vec<AttributeSet>,
    attribute_users: Vec<IdSet<UserId>>,
    attribute_items: Vec<ItemSet>,
}

impl HeteroGraph {
    /// Validates the edge records and builds the adjacency index.
    ///
    /// Records may list their endpoints in either order. Errors name the
    /// index of the first offending record.
    pub fn build(counts: VertexCounts, records: &[EdgeRecord]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(records.len());

        let (nu, ni, na) = (
            counts.users as usize,
            counts.items as usize,
            counts.attributes as usize,
        );
        let mut user_items = vec![Vec::new(); nu];
        let mut user_friends = vec![Vec::new(); nu];
        let mut user_attributes = vec![Vec::new(); nu];
        let mut item_users = vec![Vec::new(); ni];
        let mut item_attributes = vec![Vec::new(); ni];
        let mut attribute_users = vec![Vec::new(); na];
        let mut attribute_items = vec![Vec::new(); na];

        for (index, &record) in records.iter().enumerate() {
            for vertex in [record.head, record.tail] {
                if vertex.index >= counts.of(vertex.kind) {
                    return Err(Error::VertexOutOfRange { index, record, vertex });
                }
            }
            if record.head == record.tail {
                return Err(Error::SelfLoop { index, record });
            }
            let edge = record.canonical().ok_or(Error::KindMismatch { index, record })?;
            if !seen.insert((edge.head, edge.tail)) {
                return Err(Error::DuplicateEdge { index, record });
            }
            let (h, t) = (edge.head.index, edge.tail.index);
            match edge.relation {
                Relation::Interact => {
                    user_items[h as usize].push(ItemId(t));
                    item_users[t as usize].push(UserId(h));
                }
                Relation::Friend => {
                    user_friends[h as usize].push(UserId(t));
                    user_friends[t as usize].push(UserId(h));
                }
                Relation::Like => {
                    user_attributes[h as usize].push(AttributeId(t));
                    attribute_users[t as usize].push(UserId(h));
                }
                Relation::BelongTo => {
                    item_attributes[h as usize].push(AttributeId(t));
                    attribute_items[t as usize].push(ItemId(h));
                }
            }
            edges.push(edge);
        }

        fn sets<T: Copy + Ord>(lists: Vec<Vec<T>>) -> Vec<IdSet<T>> {
            lists.into_iter().map(IdSet::from_unsorted).collect()
        }

        Ok(Self {
            counts,
            edges,
            user_items: sets(user_items),
            user_friends: sets(user_friends),
            user_attributes: sets(user_attributes),
            item_users: sets(item_users),
            item_attributes: sets(item_attributes),
            attribute_users: sets(attribute_users),
            attribute_items: sets(attribute_items),
        })
    }

    pub fn counts(&self) -> VertexCounts {
        self.counts
    }

    pub fn user_count(&self) -> usize {
        self.counts.users as usize
    }

    pub fn item_count(&self) -> usize {
        self.counts.items as usize
    }

    pub fn attribute_count(&self) -> usize {
        self.counts.attributes as usize
    }

    pub fn vertex_count(&self) -> u64 {
        self.counts.total()
    }

    /// Edges in canonical endpoint order, in input order.
    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn check_user(&self, u: UserId) -> Result<()> {
        if u.index() < self.user_count() {
            Ok(())
        } else {
            Err(Error::UnknownUser(u))
        }
    }

    pub fn check_item(&self, v: ItemId) -> Result<()> {
        if v.index() < self.item_count() {
            Ok(())
        } else {
            Err(Error::UnknownItem(v))
        }
    }

    pub fn check_attribute(&self, p: AttributeId) -> Result<()> {
        if p.index() < self.attribute_count() {
            Ok(())
        } else {
            Err(Error::UnknownAttribute(p))
        }
    }

    /// Items carrying attribute `p`.
    pub fn items_with_attribute(&self, p: AttributeId) -> Result<&ItemSet> {
        self.attribute_items.get(p.index()).ok_or(Error::UnknownAttribute(p))
    }

    /// Attributes of item `v`.
    pub fn attributes_of_item(&self, v: ItemId) -> Result<&AttributeSet> {
        self.item_attributes.get(v.index()).ok_or(Error::UnknownItem(v))
    }

    /// Items user `u` interacted with.
    pub fn items_of_user(&self, u: UserId) -> Result<&ItemSet> {
        self.user_items.get(u.index()).ok_or(Error::UnknownUser(u))
    }

    pub fn users_of_item(&self, v: ItemId) -> Result<&IdSet<UserId>> {
        self.item_users.get(v.index()).ok_or(Error::UnknownItem(v))
    }

    pub fn friends_of_user(&self, u: UserId) -> Result<&IdSet<UserId>> {
        self.user_friends.get(u.index()).ok_or(Error::UnknownUser(u))
    }

    /// Attributes user `u` declared a liking for.
    pub fn attributes_of_user(&self, u: UserId) -> Result<&AttributeSet> {
        self.user_attributes.get(u.index()).ok_or(Error::UnknownUser(u))
    }

    pub fn users_with_attribute(&self, p: AttributeId) -> Result<&IdSet<UserId>> {
        self.attribute_users.get(p.index()).ok_or(Error::UnknownAttribute(p))
    }

    /// Attributes sharing at least one item or user neighbor with `p`,
    /// excluding `p` itself. These are exactly the attributes whose shortest
    /// path from `p` has length two and passes no other attribute.
    pub fn adjacent_attributes(&self, p: AttributeId) -> Result<AttributeSet> {
        self.check_attribute(p)?;
        let mut mark = vec![false; self.attribute_count()];
        for v in self.attribute_items[p.index()].iter() {
            for q in self.item_attributes[v.index()].iter() {
                mark[q.index()] = true;
            }
        }
        for u in self.attribute_users[p.index()].iter() {
            for q in self.user_attributes[u.index()].iter() {
                mark[q.index()] = true;
            }
        }
        mark[p.index()] = false;
        let ids = mark
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| AttributeId(i as u32))
            .collect();
        Ok(IdSet::from_sorted_unchecked(ids))
    }

    /// Items carrying every attribute in `accepted`.
    pub fn candidate_items(&self, accepted: &AttributeSet) -> Result<ItemSet> {
        let mut iter = accepted.iter();
        let first = iter.next().ok_or(Error::EmptyAcceptedSet)?;
        let mut out = self.items_with_attribute(first)?.clone();
        for p in iter {
            out = out.intersection(self.items_with_attribute(p)?);
        }
        Ok(out)
    }

    /// All `(user, item)` interaction pairs, ordered by user then item.
    pub fn interactions(&self) -> Vec<(UserId, ItemId)> {
        self.user_items
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |v| (UserId(u as u32), v)))
            .collect()
    }
}
