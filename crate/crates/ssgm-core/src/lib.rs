//! Governed long-term memory for autonomous agents.
//!
//! The crate separates what an agent *believes right now* from what it has
//! *observed over time*, and places both behind governance:
//!
//! ```text
//!                      writes                       reads
//!                        │                            │
//!                  ┌─────▼──────┐               ┌─────▼─────┐
//!                  │ write gate │               │ read gate │
//!                  │ provenance │               │ top-k     │
//!                  │ contradict.│               │ ACL       │
//!                  └─────┬──────┘               │ freshness │
//!                        │ admitted             └─────┬─────┘
//!            ┌───────────┼───────────┐                │
//!      ┌─────▼─────┐ ┌───▼────────┐  │          ┌─────▼─────┐
//!      │  ledger   │ │  active    │◄─┼──────────┤  callers  │
//!      │ (append-  │ │  memory    │  │          └───────────┘
//!      │  only,    │ │  (mutable  │  │
//!      │  hash-    │ │   units)   │◄─┘
//!      │  chained) │ └───▲────────┘
//!      └─────┬─────┘     │ corrections
//!            └───────────┘
//!             reconciler (periodic, bounds drift)
//! ```
//!
//! * [`ledger`] — append-only, hash-chained episodic record with per-source
//!   HMAC provenance tags ([`keyring`]). Never rewritten, only appended.
//! * [`store`] — the active memory: mutable, indexed units with deterministic
//!   hash embeddings ([`embedding`]) for similarity ranking.
//! * [`write_gate`] — every mutation is validated (provenance, contradiction
//!   against core facts) and recorded in the ledger before it is applied.
//! * [`read_gate`] — retrieval is ranked top-k, then filtered by attribute
//!   ACLs and Weibull freshness; nothing ever leaves memory unfiltered.
//! * [`reconciler`] — periodically regenerates drifted unit contents from
//!   their ledger origins, which bounds semantic drift to a single window.
//! * [`gateway`] — newline-delimited JSON protocol over a local TCP socket,
//!   single-writer commit ordering, and crash recovery by ledger replay.
//! * [`sim`] — seeded, reproducible experiments: drift with/without
//!   reconciliation, cross-tenant leakage, and write-latency by gate mode.
//! * [`config`] — flat `section.key=value` configuration shared by the CLI
//!   (`ssgm`) and embedders of the library.

pub mod config;
pub mod embedding;
pub mod error;
pub mod gateway;
pub mod keyring;
pub mod ledger;
pub mod read_gate;
pub mod reconciler;
pub mod sim;
pub mod store;
pub mod write_gate;

pub use config::{Config, GateMode, StorePaths};
pub use embedding::{cosine, drift, drift_under, HashEmbedder};
pub use error::{Error, Result};
pub use gateway::{rebuild_state, serve, Engine, Request, Response, WireUnit};
pub use keyring::Keyring;
pub use ledger::{
    verify_file, ChainReport, Digest, Durability, EntryKind, Ledger, LedgerEntry, Triple,
    GENESIS_PREV,
};
pub use read_gate::{
    acl_check, freshness, glob_match, prune_stale, retrieve, AccessPolicy, DecayConfig, Effect,
    Identity, PolicyRule, RetrievalResult, RetrievedUnit,
};
pub use reconciler::{
    reconcile, reference_of, schedule, state_reference_text, ReconcileConfig, ReconcileMode,
    ReconcileReport, StateMetric,
};
pub use store::{MemoryState, MemoryUnit, UnitDraft};
pub use write_gate::{
    Applied, AsyncGate, CommitOutcome, Conflict, ContradictionOracle, DeltaKind, GateDecision,
    GateReason, MemoryDelta, SlotOracle, WriteGate,
};

/// Reserved principal for entries the system itself writes: rejection audits
/// and freshness-pruning archives. Created in the keyring when a data
/// directory is initialized.
pub const SYSTEM_SOURCE: &str = "system";
