//! Dense per-kind vertex identifiers and sorted id sets.

use alloc::vec::Vec;
use core::fmt;

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
        #[cfg_attr(feature = "serde", serde(transparent))]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<u32> for $name {
            fn from(v: u32) -> Self {
                Self(v)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

dense_id!(
    /// A user vertex.
    UserId,
    "u"
);
dense_id!(
    /// An item vertex.
    ItemId,
    "v"
);
dense_id!(
    /// An attribute vertex.
    AttributeId,
    "p"
);

/// The three entity kinds of the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum VertexKind {
    User,
    Item,
    Attribute,
}

impl VertexKind {
    pub fn name(self) -> &'static str {
        match self {
            VertexKind::User => "user",
            VertexKind::Item => "item",
            VertexKind::Attribute => "attribute",
        }
    }
}

impl fmt::Display for VertexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A vertex of any kind, addressed by its dense per-kind index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VertexId {
    pub kind: VertexKind,
    pub index: u32,
}

impl VertexId {
    pub fn user(index: u32) -> Self {
        Self { kind: VertexKind::User, index }
    }

    pub fn item(index: u32) -> Self {
        Self { kind: VertexKind::Item, index }
    }

    pub fn attribute(index: u32) -> Self {
        Self { kind: VertexKind::Attribute, index }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.index)
    }
}

/// A sorted, deduplicated set of ids.
///
/// Iteration is always in ascending id order, which is what makes every
/// downstream tie-break reproducible.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct IdSet<T> {
    ids: Vec<T>,
}

pub type ItemSet = IdSet<ItemId>;
pub type AttributeSet = IdSet<AttributeId>;

impl<T> Default for IdSet<T> {
    fn default() -> Self {
        Self { ids: Vec::new() }
    }
}

impl<T: Copy + Ord> IdSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from ids in any order; duplicates are dropped.
    pub fn from_unsorted(mut ids: Vec<T>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    /// Caller guarantees `ids` is strictly ascending.
    pub(crate) fn from_sorted_unchecked(ids: Vec<T>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: T) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = T> + '_ {
        self.ids.iter().copied()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.ids
    }

    pub fn first(&self) -> Option<T> {
        self.ids.first().copied()
    }

    /// Returns `true` if the id was not present.
    pub fn insert(&mut self, id: T) -> bool {
        match self.ids.binary_search(&id) {
            Ok(_) => false,
            Err(pos) => {
                self.ids.insert(pos, id);
                true
            }
        }
    }

    /// Returns `true` if the id was present.
    pub fn remove(&mut self, id: T) -> bool {
        match self.ids.binary_search(&id) {
            Ok(pos) => {
                self.ids.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.ids.iter().peekable(), other.ids.iter().peekable());
        let mut out = Vec::with_capacity(self.len().min(other.len()));
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                core::cmp::Ordering::Less => {
                    a.next();
                }
                core::cmp::Ordering::Greater => {
                    b.next();
                }
                core::cmp::Ordering::Equal => {
                    out.push(x);
                    a.next();
                    b.next();
                }
            }
        }
        Self { ids: out }
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self {
            ids: self.ids.iter().copied().filter(|id| !other.contains(*id)).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut ids = Vec::with_capacity(self.len() + other.len());
        ids.extend_from_slice(&self.ids);
        ids.extend_from_slice(&other.ids);
        Self::from_unsorted(ids)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.ids.iter().all(|id| other.contains(*id))
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersection(other).is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.ids
    }
}

impl<T: Copy + Ord> FromIterator<T> for IdSet<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self::from_unsorted(iter.into_iter().collect())
    }
}

impl<'a, T> IntoIterator for &'a IdSet<T> {
    type Item = &'a T;
    type IntoIter = core::slice::Iter<'a, T>;

    fn into_iter(self) -> Self::IntoIter {
        self.ids.iter()
    }
}
