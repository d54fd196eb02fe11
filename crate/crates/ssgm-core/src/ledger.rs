//! Append-only, hash-chained episodic ledger.
//!
//! The ledger is the system's memory of record: every admitted write, every
//! rejection, every archival leaves exactly one entry here, and entries are
//! never modified or removed. Integrity is layered:
//!
//! * `entry_hash` — SHA-256 over a canonical length-prefixed encoding of all
//!   semantic fields (including the governance metadata) plus `prev_hash`;
//! * `prev_hash` — the previous entry's hash (all zeroes for the first
//!   entry), which chains entries together;
//! * `provenance_tag` — HMAC-SHA-256 over the same canonical bytes under the
//!   originating source's key from the [`crate::keyring::Keyring`];
//! * dense sequence numbers — entry `seq` equals its line position, so a
//!   dropped or duplicated line is detected without any hashing at all.
//!
//! Together these make any single-byte change to the persisted file
//! detectable by [`verify_file`], which reports the first sequence number
//! that fails.
//!
//! # Record vocabulary
//!
//! A plain observation appends with exactly the keys `seq, ts, src, content,
//! slots, scope, prev, hash, tag` (hex lowercase). Entries written by the
//! governance layer additionally carry `kind` (`add`, `update`, `delete`,
//! `archive`, `rejection`) plus the metadata replay needs: the target `idx`
//! for update/delete/archive, the `core` flag for add, and `reason` /
//! `revert_of` for rejection audits. `revert_of` marks an earlier
//! optimistically-admitted entry as void, which is how the asynchronous gate
//! "reverts" without ever rewriting history.
//!
//! # File format
//!
//! UTF-8, newline-delimited; each line is one flat JSON object in fixed
//! field order. The file is written append-only and flushed before an append
//! reports success ([`Durability::Fsync`] additionally syncs to stable
//! storage).

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::keyring::Keyring;

pub type Digest = [u8; 32];

/// `prev_hash` of the first entry.
pub const GENESIS_PREV: Digest = [0u8; 32];

/// A `(subject, attribute, value)` slot. Serialized as a 3-element array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct Triple {
    pub subject: String,
    pub attribute: String,
    pub value: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        attribute: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Triple {
            subject: subject.into(),
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

impl From<(String, String, String)> for Triple {
    fn from((subject, attribute, value): (String, String, String)) -> Self {
        Triple {
            subject,
            attribute,
            value,
        }
    }
}

impl From<Triple> for (String, String, String) {
    fn from(t: Triple) -> Self {
        (t.subject, t.attribute, t.value)
    }
}

/// What a ledger entry documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryKind {
    /// A raw observation with no attached state action.
    Observation,
    /// An admitted Add; replay allocates the next idx. `core` marks the unit
    /// as a core fact.
    Add { core: bool },
    /// An admitted Update of unit `idx`; the entry's content/slots are the
    /// new values and the entry's own seq joins the unit's origins.
    Update { idx: u64 },
    /// An admitted Delete of unit `idx` (tombstone).
    Delete { idx: u64 },
    /// Unit `idx` was archived out of active memory by freshness pruning;
    /// the entry preserves its final content.
    Archive { idx: u64 },
    /// A rejected write (audit record). `revert_of` points at an earlier
    /// optimistically-admitted entry that replay must skip.
    Rejection {
        reason: String,
        revert_of: Option<u64>,
    },
}

impl EntryKind {
    pub fn name(&self) -> &'static str {
        match self {
            EntryKind::Observation => "obs",
            EntryKind::Add { .. } => "add",
            EntryKind::Update { .. } => "update",
            EntryKind::Delete { .. } => "delete",
            EntryKind::Archive { .. } => "archive",
            EntryKind::Rejection { .. } => "rejection",
        }
    }

    /// Entries that record an admitted state-changing delta.
    pub fn is_action(&self) -> bool {
        matches!(
            self,
            EntryKind::Add { .. } | EntryKind::Update { .. } | EntryKind::Delete { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub seq: u64,
    /// Logical turn at which the entry was written.
    pub timestamp: u64,
    pub source_id: String,
    pub content: String,
    pub slots: Vec<Triple>,
    pub scope: String,
    pub kind: EntryKind,
    pub prev_hash: Digest,
    pub entry_hash: Digest,
    pub provenance_tag: Digest,
}

// ---------------------------------------------------------------------------
// Canonical encoding and hashing
// ---------------------------------------------------------------------------

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    put_u64(buf, b.len() as u64);
    buf.extend_from_slice(b);
}

/// The canonical length-prefixed encoding every hash and tag is computed
/// over. Covers all semantic fields plus `prev_hash`; deliberately excludes
/// `entry_hash` and `provenance_tag` themselves.
pub fn canonical_bytes(
    seq: u64,
    timestamp: u64,
    source_id: &str,
    content: &str,
    slots: &[Triple],
    scope: &str,
    kind: &EntryKind,
    prev_hash: &Digest,
) -> Vec<u8> {
    let mut buf = Vec::with_capacity(128 + content.len());
    put_u64(&mut buf, seq);
    put_u64(&mut buf, timestamp);
    put_bytes(&mut buf, source_id.as_bytes());
    put_bytes(&mut buf, content.as_bytes());
    put_u64(&mut buf, slots.len() as u64);
    for s in slots {
        put_bytes(&mut buf, s.subject.as_bytes());
        put_bytes(&mut buf, s.attribute.as_bytes());
        put_bytes(&mut buf, s.value.as_bytes());
    }
    put_bytes(&mut buf, scope.as_bytes());
    match kind {
        EntryKind::Observation => buf.push(0),
        EntryKind::Add { core } => {
            buf.push(1);
            buf.push(u8::from(*core));
        }
        EntryKind::Update { idx } => {
            buf.push(2);
            put_u64(&mut buf, *idx);
        }
        EntryKind::Delete { idx } => {
            buf.push(3);
            put_u64(&mut buf, *idx);
        }
        EntryKind::Archive { idx } => {
            buf.push(4);
            put_u64(&mut buf, *idx);
        }
        EntryKind::Rejection { reason, revert_of } => {
            buf.push(5);
            put_bytes(&mut buf, reason.as_bytes());
            match revert_of {
                None => buf.push(0),
                Some(s) => {
                    buf.push(1);
                    put_u64(&mut buf, *s);
                }
            }
        }
    }
    buf.extend_from_slice(prev_hash);
    buf
}

fn sha256(bytes: &[u8]) -> Digest {
    let out = Sha256::digest(bytes);
    let mut d = [0u8; 32];
    d.copy_from_slice(&out);
    d
}

// ---------------------------------------------------------------------------
// Wire format (one JSON object per line)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireEntry {
    seq: u64,
    ts: u64,
    src: String,
    content: String,
    slots: Vec<Triple>,
    scope: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idx: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    core: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    revert_of: Option<u64>,
    prev: String,
    hash: String,
    tag: String,
}

fn hex32(s: &str, what: &str) -> std::result::Result<Digest, String> {
    let bytes = hex::decode(s).map_err(|e| format!("{what}: bad hex: {e}"))?;
    let arr: Digest = bytes
        .try_into()
        .map_err(|_| format!("{what}: expected 32 bytes"))?;
    Ok(arr)
}

impl WireEntry {
    fn from_entry(e: &LedgerEntry) -> Self {
        let (kind, idx, core, reason, revert_of) = match &e.kind {
            EntryKind::Observation => (None, None, None, None, None),
            EntryKind::Add { core } => (Some("add"), None, Some(*core), None, None),
            EntryKind::Update { idx } => (Some("update"), Some(*idx), None, None, None),
            EntryKind::Delete { idx } => (Some("delete"), Some(*idx), None, None, None),
            EntryKind::Archive { idx } => (Some("archive"), Some(*idx), None, None, None),
            EntryKind::Rejection { reason, revert_of } => (
                Some("rejection"),
                None,
                None,
                Some(reason.clone()),
                *revert_of,
            ),
        };
        WireEntry {
            seq: e.seq,
            ts: e.timestamp,
            src: e.source_id.clone(),
            content: e.content.clone(),
            slots: e.slots.clone(),
            scope: e.scope.clone(),
            kind: kind.map(str::to_string),
            idx,
            core,
            reason,
            revert_of,
            prev: hex::encode(e.prev_hash),
            hash: hex::encode(e.entry_hash),
            tag: hex::encode(e.provenance_tag),
        }
    }

    fn into_entry(self) -> std::result::Result<LedgerEntry, String> {
        let kind = match self.kind.as_deref() {
            None | Some("obs") => EntryKind::Observation,
            Some("add") => EntryKind::Add {
                core: self.core.ok_or("add entry missing `core`")?,
            },
            Some("update") => EntryKind::Update {
                idx: self.idx.ok_or("update entry missing `idx`")?,
            },
            Some("delete") => EntryKind::Delete {
                idx: self.idx.ok_or("delete entry missing `idx`")?,
            },
            Some("archive") => EntryKind::Archive {
                idx: self.idx.ok_or("archive entry missing `idx`")?,
            },
            Some("rejection") => EntryKind::Rejection {
                reason: self.reason.ok_or("rejection entry missing `reason`")?,
                revert_of: self.revert_of,
            },
            Some(other) => return Err(format!("unknown entry kind `{other}`")),
        };
        Ok(LedgerEntry {
            seq: self.seq,
            timestamp: self.ts,
            source_id: self.src,
            content: self.content,
            slots: self.slots,
            scope: self.scope,
            kind,
            prev_hash: hex32(&self.prev, "prev")?,
            entry_hash: hex32(&self.hash, "hash")?,
            provenance_tag: hex32(&self.tag, "tag")?,
        })
    }
}

fn entry_to_line(e: &LedgerEntry) -> String {
    serde_json::to_string(&WireEntry::from_entry(e)).expect("ledger entries always serialize")
}

fn line_to_entry(line: &str) -> std::result::Result<LedgerEntry, String> {
    let wire: WireEntry =
        serde_json::from_str(line).map_err(|e| format!("unparseable record: {e}"))?;
    wire.into_entry()
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Outcome of a chain verification walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainReport {
    pub valid: bool,
    /// First sequence number that failed a check (position-derived when the
    /// record at that position cannot even be parsed).
    pub first_bad_seq: Option<u64>,
    pub entries_checked: u64,
    pub detail: Option<String>,
}

impl ChainReport {
    fn ok(entries_checked: u64) -> Self {
        ChainReport {
            valid: true,
            first_bad_seq: None,
            entries_checked,
            detail: None,
        }
    }

    fn bad(seq: u64, detail: impl Into<String>) -> Self {
        ChainReport {
            valid: false,
            first_bad_seq: Some(seq),
            entries_checked: seq,
            detail: Some(detail.into()),
        }
    }
}

/// Checks one parsed entry against its expected position and predecessor
/// hash. `keyring: None` skips provenance tags (structural verification).
fn check_entry(
    entry: &LedgerEntry,
    expected_seq: u64,
    expected_prev: &Digest,
    keyring: Option<&Keyring>,
) -> std::result::Result<(), String> {
    if entry.seq != expected_seq {
        return Err(format!(
            "seq {} where {} was expected",
            entry.seq, expected_seq
        ));
    }
    if entry.prev_hash != *expected_prev {
        return Err("prev hash does not match predecessor".to_string());
    }
    let canonical = canonical_bytes(
        entry.seq,
        entry.timestamp,
        &entry.source_id,
        &entry.content,
        &entry.slots,
        &entry.scope,
        &entry.kind,
        &entry.prev_hash,
    );
    if sha256(&canonical) != entry.entry_hash {
        return Err("entry hash does not match contents".to_string());
    }
    if let Some(kr) = keyring {
        match kr.verify_tag(&entry.source_id, &canonical, &entry.provenance_tag) {
            Ok(true) => {}
            Ok(false) => return Err("provenance tag does not verify".to_string()),
            Err(_) => {
                return Err(format!(
                    "no provenance key for source `{}`",
                    entry.source_id
                ))
            }
        }
    }
    Ok(())
}

fn verify_entries(entries: &[LedgerEntry], keyring: Option<&Keyring>) -> ChainReport {
    let mut prev = GENESIS_PREV;
    for (i, entry) in entries.iter().enumerate() {
        if let Err(detail) = check_entry(entry, i as u64, &prev, keyring) {
            return ChainReport::bad(i as u64, detail);
        }
        prev = entry.entry_hash;
    }
    ChainReport::ok(entries.len() as u64)
}

/// Verifies a ledger file byte-by-byte without requiring it to load first:
/// unparseable or non-UTF-8 lines, merged lines, and trailing garbage are
/// all reported as failures at the position where they occur. This is the
/// right entry point for auditing a file that may have been tampered with.
pub fn verify_file(path: &Path, keyring: Option<&Keyring>) -> Result<ChainReport> {
    let bytes = std::fs::read(path)?;
    let mut prev = GENESIS_PREV;
    let mut seq: u64 = 0;
    for raw in bytes.split(|&b| b == b'\n') {
        if raw.is_empty() {
            continue; // the file's trailing newline; interior blanks cannot
                      // occur because every record line is non-empty JSON
        }
        let line = match std::str::from_utf8(raw) {
            Ok(s) => s,
            Err(e) => return Ok(ChainReport::bad(seq, format!("non-UTF-8 record: {e}"))),
        };
        let entry = match line_to_entry(line) {
            Ok(e) => e,
            Err(detail) => return Ok(ChainReport::bad(seq, detail)),
        };
        if let Err(detail) = check_entry(&entry, seq, &prev, keyring) {
            return Ok(ChainReport::bad(seq, detail));
        }
        prev = entry.entry_hash;
        seq += 1;
    }
    Ok(ChainReport::ok(seq))
}

// ---------------------------------------------------------------------------
// The ledger itself
// ---------------------------------------------------------------------------

/// How hard an append pushes bytes toward the platter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// Write and flush to the OS before returning (survives process death).
    #[default]
    Flush,
    /// Additionally fsync (survives power loss; slower).
    Fsync,
}

/// An append-only ledger, optionally backed by a file. All entries are held
/// in memory (desk scale by design); the file, when present, is the durable
/// source of truth and is written strictly append-only.
#[derive(Debug)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    writer: Option<BufWriter<File>>,
    path: Option<PathBuf>,
    durability: Durability,
}

impl Ledger {
    /// A ledger with no backing file (tests, simulations).
    pub fn in_memory() -> Self {
        Ledger {
            entries: Vec::new(),
            writer: None,
            path: None,
            durability: Durability::Flush,
        }
    }

    /// Opens (or creates) a file-backed ledger. Loading is strict: an
    /// unparseable or out-of-order record fails with
    /// [`Error::ChainInvalid`]. Hashes and tags are *not* checked here —
    /// run [`Ledger::verify_chain`] or [`verify_file`] for that.
    pub fn open(path: &Path, durability: Durability) -> Result<Self> {
        let mut entries = Vec::new();
        if path.exists() {
            let bytes = std::fs::read(path)?;
            for raw in bytes.split(|&b| b == b'\n') {
                if raw.is_empty() {
                    continue;
                }
                let seq = entries.len() as u64;
                let line = std::str::from_utf8(raw).map_err(|e| Error::ChainInvalid {
                    first_bad_seq: seq,
                    detail: format!("non-UTF-8 record: {e}"),
                })?;
                let entry = line_to_entry(line).map_err(|detail| Error::ChainInvalid {
                    first_bad_seq: seq,
                    detail,
                })?;
                if entry.seq != seq {
                    return Err(Error::ChainInvalid {
                        first_bad_seq: seq,
                        detail: format!("seq {} where {} was expected", entry.seq, seq),
                    });
                }
                entries.push(entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Ledger {
            entries,
            writer: Some(BufWriter::new(file)),
            path: Some(path.to_path_buf()),
            durability,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.entries.last().map(|e| e.seq)
    }

    pub fn get(&self, seq: u64) -> Option<&LedgerEntry> {
        self.entries.get(seq as usize)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Hash of the newest entry ([`GENESIS_PREV`] when empty); the value the
    /// next entry must chain from.
    pub fn tip_hash(&self) -> Digest {
        self.entries
            .last()
            .map(|e| e.entry_hash)
            .unwrap_or(GENESIS_PREV)
    }

    /// Appends a plain observation. See [`Ledger::append_entry`].
    pub fn append(
        &mut self,
        keyring: &Keyring,
        content: &str,
        slots: Vec<Triple>,
        source_id: &str,
        scope: &str,
        timestamp: u64,
    ) -> Result<u64> {
        self.append_entry(
            keyring,
            EntryKind::Observation,
            content,
            slots,
            source_id,
            scope,
            timestamp,
        )
    }

    /// Appends one entry: assigns the next dense seq, chains `prev_hash`
    /// from the current tip, hashes, tags under `source_id`'s key, and
    /// (when file-backed) writes and flushes the record before reporting
    /// success. Fails with [`Error::UnknownSource`] if the source has no
    /// key, in which case nothing is written.
    pub fn append_entry(
        &mut self,
        keyring: &Keyring,
        kind: EntryKind,
        content: &str,
        slots: Vec<Triple>,
        source_id: &str,
        scope: &str,
        timestamp: u64,
    ) -> Result<u64> {
        let seq = self.entries.len() as u64;
        let prev_hash = self.tip_hash();
        let canonical = canonical_bytes(
            seq, timestamp, source_id, content, &slots, scope, &kind, &prev_hash,
        );
        let entry_hash = sha256(&canonical);
        let provenance_tag = keyring.tag(source_id, &canonical)?;
        let entry = LedgerEntry {
            seq,
            timestamp,
            source_id: source_id.to_string(),
            content: content.to_string(),
            slots,
            scope: scope.to_string(),
            kind,
            prev_hash,
            entry_hash,
            provenance_tag,
        };
        if let Some(w) = self.writer.as_mut() {
            let mut line = entry_to_line(&entry);
            line.push('\n');
            w.write_all(line.as_bytes())?;
            w.flush()?;
            if self.durability == Durability::Fsync {
                w.get_ref().sync_data()?;
            }
        }
        self.entries.push(entry);
        Ok(seq)
    }

    /// Ordered entries with `from_seq <= seq <= to_seq` (both inclusive).
    /// The range must be non-reversed and lie entirely within the ledger.
    pub fn replay(&self, from_seq: u64, to_seq: u64) -> Result<&[LedgerEntry]> {
        let last = self.last_seq();
        let in_bounds = matches!(last, Some(l) if from_seq <= to_seq && to_seq <= l);
        if !in_bounds {
            return Err(Error::RangeOutOfBounds {
                from: from_seq,
                to: to_seq,
                last,
            });
        }
        Ok(&self.entries[from_seq as usize..=to_seq as usize])
    }

    /// Walks the in-memory chain: dense seqs, hash links, entry hashes, and
    /// (when a keyring is supplied) provenance tags.
    pub fn verify_chain(&self, keyring: Option<&Keyring>) -> ChainReport {
        verify_entries(&self.entries, keyring)
    }
}
