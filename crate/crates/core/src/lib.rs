//! Conversational path reasoning over a user–item–attribute graph.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and the HTTP session service live in the `cpr` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod embed;
pub mod engine;
pub mod error;
pub mod graph;
pub mod ids;
pub mod math;
pub mod metrics;
pub mod policy;
pub mod reasoner;
pub mod rng;

pub use embed::{EmbeddingTable, TrainConfig};
pub use engine::{Answer, Conversation, EpisodeLog, EpisodeSpec, Move, Outcome, Policy, PolicyKind, Reply, Responder};
pub use error::{Error, Result};
pub use graph::{EdgeRecord, HeteroGraph, Relation, VertexCounts};
pub use ids::{AttributeId, AttributeSet, IdSet, ItemId, ItemSet, UserId, VertexId, VertexKind};
pub use policy::{Action, DqnConfig, QNetwork, Rewards};
pub use reasoner::SessionState;
