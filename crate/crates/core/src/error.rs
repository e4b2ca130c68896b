use alloc::string::String;

use crate::graph::EdgeRecord;
use crate::ids::{AttributeId, ItemId, UserId, VertexId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("edge #{index} ({record}): self-loop")]
    SelfLoop { index: usize, record: EdgeRecord },
    #[error("edge #{index} ({record}): relation does not match endpoint kinds")]
    KindMismatch { index: usize, record: EdgeRecord },
    #[error("edge #{index} ({record}): duplicate edge")]
    DuplicateEdge { index: usize, record: EdgeRecord },
    #[error("edge #{index} ({record}): vertex {vertex} out of range")]
    VertexOutOfRange { index: usize, record: EdgeRecord, vertex: VertexId },

    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("unknown attribute {0}")]
    UnknownAttribute(AttributeId),

    #[error("accepted attribute set is empty")]
    EmptyAcceptedSet,
    #[error("attribute {0} is not attached to any item")]
    AttributeWithoutItems(AttributeId),
    #[error("attribute {0} is not a candidate attribute")]
    NotCandidateAttribute(AttributeId),
    #[error("attribute {0} was already asked")]
    AlreadyAsked(AttributeId),
    #[error("item {0} is not a candidate item")]
    NotCandidateItem(ItemId),
    #[error("candidate item set is empty")]
    EmptyCandidates,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("history has {len} turns, more than the limit of {max}")]
    HistoryTooLong { len: usize, max: usize },
    #[error("recommendation list has {len} items, more than k = {k}")]
    ListTooLong { len: usize, k: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("conversation already finished")]
    ConversationFinished,
    #[error("no move is awaiting an answer")]
    NoPendingMove,
    #[error("a move is already awaiting an answer")]
    MovePending,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
