//! Active memory: the small, mutable working set the agent actually reads.
//!
//! Units live in a `BTreeMap` keyed by a monotonically increasing `idx`, so
//! iteration order — and therefore every derived artifact (canonical text,
//! content hash, Top-K tie-breaks) — is deterministic. The store itself is
//! deliberately ungoverned plumbing: admission control lives in
//! [`crate::write_gate`], visibility control in [`crate::read_gate`], and
//! drift repair in [`crate::reconciler`]. The one rule enforced *here* is
//! lineage: a unit cannot be created without pointing at the ledger entries
//! it derives from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::embedding::{cosine, HashEmbedder};
use crate::error::{Error, Result};
use crate::ledger::Triple;

/// One unit of active memory.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryUnit {
    pub idx: u64,
    pub content: String,
    pub slots: Vec<Triple>,
    pub embedding: Vec<f64>,
    /// Visibility scope, matched against policy rules at read time.
    pub scope: String,
    pub source_id: String,
    /// Logical turn the unit entered active memory.
    pub created_at: u64,
    /// Logical turn of the last retrieval that returned this unit (or the
    /// last update). Drives freshness decay.
    pub last_used_at: u64,
    /// Ledger seqs the *current* content derives from, oldest first. Never
    /// empty. An update replaces this with the update entry's own seq —
    /// earlier revisions remain discoverable in the ledger, which records
    /// the target idx of every update.
    pub origin_seqs: Vec<u64>,
    /// Core facts anchor contradiction checks and are exempt from pruning.
    pub is_core: bool,
}

/// Everything needed to admit a brand-new unit.
#[derive(Debug, Clone)]
pub struct UnitDraft {
    pub content: String,
    pub slots: Vec<Triple>,
    pub scope: String,
    pub source_id: String,
    pub origin_seqs: Vec<u64>,
    pub is_core: bool,
}

/// The active store plus the logical clock it ages against.
#[derive(Debug, Clone)]
pub struct MemoryState {
    embedder: HashEmbedder,
    units: BTreeMap<u64, MemoryUnit>,
    next_idx: u64,
    clock: u64,
}

impl MemoryState {
    pub fn new(embedder: HashEmbedder) -> Self {
        MemoryState {
            embedder,
            units: BTreeMap::new(),
            next_idx: 0,
            clock: 0,
        }
    }

    pub fn embedder(&self) -> &HashEmbedder {
        &self.embedder
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn set_clock(&mut self, turn: u64) {
        self.clock = turn;
    }

    /// Advances the logical clock by one turn and returns the new value.
    pub fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn get(&self, idx: u64) -> Option<&MemoryUnit> {
        self.units.get(&idx)
    }

    /// Units in ascending idx order.
    pub fn units(&self) -> impl Iterator<Item = &MemoryUnit> {
        self.units.values()
    }

    pub fn core_units(&self) -> impl Iterator<Item = &MemoryUnit> {
        self.units.values().filter(|u| u.is_core)
    }

    /// Inserts a new unit at the next idx. `ledger_last` is the newest seq
    /// the ledger currently holds; every origin must refer to an entry that
    /// already exists, otherwise the draft is rejected with
    /// [`Error::InvalidOrigin`] — lineage cannot point at the future.
    pub fn insert(&mut self, draft: UnitDraft, ledger_last: Option<u64>) -> Result<u64> {
        if draft.origin_seqs.is_empty() {
            return Err(Error::InvalidOrigin(
                "unit must derive from at least one ledger entry".into(),
            ));
        }
        let last = ledger_last.ok_or_else(|| {
            Error::InvalidOrigin("ledger is empty; no entry to derive from".into())
        })?;
        if let Some(&bad) = draft.origin_seqs.iter().find(|&&s| s > last) {
            return Err(Error::InvalidOrigin(format!(
                "origin seq {bad} is beyond the newest ledger entry {last}"
            )));
        }
        let idx = self.next_idx;
        self.next_idx += 1;
        let embedding = self.embedder.embed(&draft.content);
        self.units.insert(
            idx,
            MemoryUnit {
                idx,
                content: draft.content,
                slots: draft.slots,
                embedding,
                scope: draft.scope,
                source_id: draft.source_id,
                created_at: self.clock,
                last_used_at: self.clock,
                origin_seqs: draft.origin_seqs,
                is_core: draft.is_core,
            },
        );
        Ok(idx)
    }

    /// Replaces a unit's content and slots, re-embeds, points its origins
    /// at `recorded_seq` (the entry that now defines the content), and
    /// refreshes `last_used_at`.
    pub fn update(
        &mut self,
        idx: u64,
        content: &str,
        slots: Vec<Triple>,
        recorded_seq: u64,
    ) -> Result<()> {
        let embedding = self.embedder.embed(content);
        let unit = self.units.get_mut(&idx).ok_or(Error::UnknownIdx(idx))?;
        unit.content = content.to_string();
        unit.slots = slots;
        unit.embedding = embedding;
        unit.origin_seqs = vec![recorded_seq];
        unit.last_used_at = self.clock;
        Ok(())
    }

    /// Removes a unit; `true` if it existed. Idempotent by design — replay
    /// and pruning may race to the same tombstone.
    pub fn delete(&mut self, idx: u64) -> bool {
        self.units.remove(&idx).is_some()
    }

    /// Swaps a unit's content (and embedding) without touching slots,
    /// origins, or timestamps. This is the reconciler's repair primitive
    /// and the simulator's corruption primitive — an *unledgered* rewrite.
    pub fn overwrite_content(&mut self, idx: u64, content: &str) -> Result<()> {
        let embedding = self.embedder.embed(content);
        let unit = self.units.get_mut(&idx).ok_or(Error::UnknownIdx(idx))?;
        unit.content = content.to_string();
        unit.embedding = embedding;
        Ok(())
    }

    /// Marks a unit as returned by a retrieval at the current turn.
    pub fn touch(&mut self, idx: u64) -> Result<()> {
        let clock = self.clock;
        let unit = self.units.get_mut(&idx).ok_or(Error::UnknownIdx(idx))?;
        unit.last_used_at = clock;
        Ok(())
    }

    /// The `k` most similar units to `query`, ordered by descending cosine
    /// similarity with ascending idx as the tie-break. Pure — does not
    /// touch `last_used_at`. ACL and freshness filtering happen above this,
    /// in the read gate.
    pub fn topk(&self, query: &str, k: usize) -> Vec<(u64, f64)> {
        let q = self.embedder.embed(query);
        let mut scored: Vec<(u64, f64)> = self
            .units
            .values()
            .map(|u| (u.idx, cosine(&q, &u.embedding)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    /// All unit contents, idx order, single-space separated. The state-level
    /// text the reconciler measures drift against.
    pub fn canonical_text(&self) -> String {
        let parts: Vec<&str> = self.units.values().map(|u| u.content.as_str()).collect();
        parts.join(" ")
    }

    /// SHA-256 over the semantic content of the store: idx, content, slots,
    /// scope, source, core flag, creation turn, and origins of every unit,
    /// in idx order. Usage stamps (`last_used_at`), the clock, and the idx
    /// allocator are excluded, so two stores that hold the same facts hash
    /// identically regardless of read traffic.
    pub fn content_hash(&self) -> [u8; 32] {
        fn put_u64(h: &mut Sha256, v: u64) {
            h.update(v.to_le_bytes());
        }
        fn put_bytes(h: &mut Sha256, b: &[u8]) {
            put_u64(h, b.len() as u64);
            h.update(b);
        }
        let mut h = Sha256::new();
        put_u64(&mut h, self.units.len() as u64);
        for u in self.units.values() {
            put_u64(&mut h, u.idx);
            put_bytes(&mut h, u.content.as_bytes());
            put_u64(&mut h, u.slots.len() as u64);
            for s in &u.slots {
                put_bytes(&mut h, s.subject.as_bytes());
                put_bytes(&mut h, s.attribute.as_bytes());
                put_bytes(&mut h, s.value.as_bytes());
            }
            put_bytes(&mut h, u.scope.as_bytes());
            put_bytes(&mut h, u.source_id.as_bytes());
            h.update([u8::from(u.is_core)]);
            put_u64(&mut h, u.created_at);
            put_u64(&mut h, u.origin_seqs.len() as u64);
            for &s in &u.origin_seqs {
                put_u64(&mut h, s);
            }
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }

    // -- snapshots ---------------------------------------------------------

    /// Writes the store as newline-delimited JSON: a header record carrying
    /// the clock and idx allocator, then one record per unit (embeddings are
    /// omitted and recomputed on import).
    pub fn export_snapshot(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::new();
        let header = SnapshotHeader {
            clock: self.clock,
            next_idx: self.next_idx,
            dim: self.embedder.dim(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for u in self.units.values() {
            let rec = SnapshotUnit {
                idx: u.idx,
                content: u.content.clone(),
                slots: u.slots.clone(),
                scope: u.scope.clone(),
                src: u.source_id.clone(),
                created_at: u.created_at,
                last_used_at: u.last_used_at,
                origins: u.origin_seqs.clone(),
                core: u.is_core,
            };
            out.push_str(&serde_json::to_string(&rec).expect("unit serializes"));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Rebuilds a store from [`MemoryState::export_snapshot`] output.
    pub fn import_snapshot(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::InvalidConfig("snapshot is empty".into()))?;
        let header: SnapshotHeader = serde_json::from_str(header_line)
            .map_err(|e| Error::InvalidConfig(format!("snapshot header: {e}")))?;
        let embedder = HashEmbedder::new(header.dim)?;
        let mut state = MemoryState::new(embedder);
        state.clock = header.clock;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let rec: SnapshotUnit = serde_json::from_str(line)
                .map_err(|e| Error::InvalidConfig(format!("snapshot unit: {e}")))?;
            let embedding = state.embedder.embed(&rec.content);
            state.units.insert(
                rec.idx,
                MemoryUnit {
                    idx: rec.idx,
                    content: rec.content,
                    slots: rec.slots,
                    embedding,
                    scope: rec.scope,
                    source_id: rec.src,
                    created_at: rec.created_at,
                    last_used_at: rec.last_used_at,
                    origin_seqs: rec.origins,
                    is_core: rec.core,
                },
            );
        }
        state.next_idx = header.next_idx;
        Ok(state)
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    clock: u64,
    next_idx: u64,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct SnapshotUnit {
    idx: u64,
    content: String,
    slots: Vec<Triple>,
    scope: String,
    src: String,
    created_at: u64,
    last_used_at: u64,
    origins: Vec<u64>,
    core: bool,
}
