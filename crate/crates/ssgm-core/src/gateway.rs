//! The gateway: a request/response front door over the governed store.
//!
//! [`Engine`] owns one data directory — ledger, keyring, policy, snapshot —
//! and turns JSON requests (`add`, `update`, `delete`, `retrieve`) into
//! gate-checked operations. Opening an engine replays the ledger back into
//! active memory, so a process kill loses at most the in-flight request:
//! everything acknowledged was flushed to the ledger first.
//!
//! [`serve`] exposes an engine over TCP, newline-delimited JSON both ways.
//! Requests are handled under one engine lock in arrival order; a malformed
//! line gets an error response and the connection stays open.
//!
//! The logical clock ticks once per write request — admitted or rejected —
//! and never for reads. Entry timestamps carry the clock, which is what
//! lets replay reconstruct creation stamps exactly. Every `period_n` turns
//! the engine reconciles active memory against the ledger and sweeps stale
//! units, so governance runs even when nobody calls it explicitly.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::{Config, GateMode, StorePaths};
use crate::embedding::HashEmbedder;
use crate::error::{Error, Result};
use crate::keyring::Keyring;
use crate::ledger::{Durability, EntryKind, Ledger, Triple};
use crate::read_gate::{self, AccessPolicy, Identity};
use crate::reconciler::{self, ReconcileReport};
use crate::store::{MemoryState, UnitDraft};
use crate::write_gate::{CommitOutcome, DeltaKind, GateReason, MemoryDelta, WriteGate};
use crate::SYSTEM_SOURCE;

// ---------------------------------------------------------------------------
// Wire types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub principal: String,
    /// Identity claims as `attr=value` strings.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attrs: Vec<String>,
    /// `add`, `update`, `delete`, or `retrieve`.
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<Triple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub core: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub privileged: bool,
    /// Hex HMAC over [`Request::mac_input`] under the principal's key;
    /// demanded of every non-system principal when `gate.require_mac` is
    /// set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<String>,
}

impl Request {
    pub fn new(principal: impl Into<String>, action: impl Into<String>) -> Self {
        Request {
            id: None,
            principal: principal.into(),
            attrs: Vec::new(),
            action: action.into(),
            content: None,
            scope: None,
            query: None,
            slots: Vec::new(),
            idx: None,
            k: None,
            core: false,
            privileged: false,
            mac: None,
        }
    }

    /// Canonical bytes the request MAC covers: every semantic field,
    /// length-prefixed; `id` and the MAC itself are excluded.
    pub fn mac_input(&self) -> Vec<u8> {
        fn put_u64(buf: &mut Vec<u8>, v: u64) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fn put_str(buf: &mut Vec<u8>, s: &str) {
            put_u64(buf, s.len() as u64);
            buf.extend_from_slice(s.as_bytes());
        }
        fn put_opt(buf: &mut Vec<u8>, s: Option<&str>) {
            match s {
                None => buf.push(0),
                Some(s) => {
                    buf.push(1);
                    put_str(buf, s);
                }
            }
        }
        let mut buf = Vec::new();
        put_str(&mut buf, &self.principal);
        put_u64(&mut buf, self.attrs.len() as u64);
        for a in &self.attrs {
            put_str(&mut buf, a);
        }
        put_str(&mut buf, &self.action);
        put_opt(&mut buf, self.content.as_deref());
        put_opt(&mut buf, self.scope.as_deref());
        put_opt(&mut buf, self.query.as_deref());
        put_u64(&mut buf, self.slots.len() as u64);
        for s in &self.slots {
            put_str(&mut buf, &s.subject);
            put_str(&mut buf, &s.attribute);
            put_str(&mut buf, &s.value);
        }
        match self.idx {
            None => buf.push(0),
            Some(i) => {
                buf.push(1);
                put_u64(&mut buf, i);
            }
        }
        match self.k {
            None => buf.push(0),
            Some(k) => {
                buf.push(1);
                put_u64(&mut buf, k as u64);
            }
        }
        buf.push(u8::from(self.core));
        buf.push(u8::from(self.privileged));
        buf
    }

    /// Computes and attaches the MAC for this request.
    pub fn sign(mut self, keyring: &Keyring) -> Result<Self> {
        let tag = keyring.tag(&self.principal, &self.mac_input())?;
        self.mac = Some(hex::encode(tag));
        Ok(self)
    }
}

/// A retrieved unit as shown to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireUnit {
    pub idx: u64,
    pub similarity: f64,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<Triple>,
    pub scope: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Response {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    /// `ok`, `rejected`, `denied`, or `error`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflicting_core_idx: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<WireUnit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    fn base(id: Option<u64>, status: &str) -> Self {
        Response {
            id,
            status: status.to_string(),
            ..Response::default()
        }
    }

    fn error(id: Option<u64>, message: impl Into<String>) -> Self {
        let mut r = Response::base(id, "error");
        r.error = Some(message.into());
        r
    }
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// Rebuilds active memory by replaying a ledger from the beginning.
///
/// Action entries named by a rejection's `revert_of` are voided and
/// skipped. Timestamps drive the logical clock, so creation and usage
/// stamps come back exactly as they were recorded. The ledger is trusted
/// here — verify the chain before replaying.
pub fn rebuild_state(ledger: &Ledger, embedder: HashEmbedder) -> Result<MemoryState> {
    let mut reverted: BTreeSet<u64> = BTreeSet::new();
    for entry in ledger.entries() {
        if let EntryKind::Rejection {
            revert_of: Some(seq),
            ..
        } = &entry.kind
        {
            reverted.insert(*seq);
        }
    }
    let mut state = MemoryState::new(embedder);
    for entry in ledger.entries() {
        state.set_clock(state.clock().max(entry.timestamp));
        if reverted.contains(&entry.seq) {
            if let EntryKind::Add { core } = &entry.kind {
                // The live run handed this add an idx before it was
                // reverted; burn the same idx so later entries line up.
                let idx = state.insert(
                    UnitDraft {
                        content: entry.content.clone(),
                        slots: entry.slots.clone(),
                        scope: entry.scope.clone(),
                        source_id: entry.source_id.clone(),
                        origin_seqs: vec![entry.seq],
                        is_core: *core,
                    },
                    Some(entry.seq),
                )?;
                state.delete(idx);
            }
            continue;
        }
        match &entry.kind {
            EntryKind::Observation | EntryKind::Rejection { .. } => {}
            EntryKind::Add { core } => {
                state.insert(
                    UnitDraft {
                        content: entry.content.clone(),
                        slots: entry.slots.clone(),
                        scope: entry.scope.clone(),
                        source_id: entry.source_id.clone(),
                        origin_seqs: vec![entry.seq],
                        is_core: *core,
                    },
                    Some(entry.seq),
                )?;
            }
            EntryKind::Update { idx } => {
                state.update(*idx, &entry.content, entry.slots.clone(), entry.seq)?;
            }
            EntryKind::Delete { idx } | EntryKind::Archive { idx } => {
                if !state.delete(*idx) {
                    return Err(Error::UnknownIdx(*idx));
                }
            }
        }
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

pub struct Engine {
    cfg: Config,
    paths: StorePaths,
    keyring: Keyring,
    policy: AccessPolicy,
    ledger: Ledger,
    state: MemoryState,
    gate: WriteGate,
}

impl Engine {
    /// Opens a data directory: loads (or initializes) the keyring and
    /// policy, opens the ledger, verifies the full chain including
    /// provenance tags, replays it into active memory, and overlays usage
    /// stamps from the last snapshot if one was written.
    pub fn open(data_dir: &Path, cfg: Config) -> Result<Engine> {
        cfg.validate()?;
        let paths = cfg.paths(data_dir);
        std::fs::create_dir_all(&paths.data_dir)?;

        let mut keyring = Keyring::load(&paths.keyring)?;
        if !keyring.contains(SYSTEM_SOURCE) {
            keyring.register(SYSTEM_SOURCE);
            keyring.save(&paths.keyring)?;
        }
        let policy = AccessPolicy::load(&paths.policy)?;

        let durability = if cfg.fsync {
            Durability::Fsync
        } else {
            Durability::Flush
        };
        let ledger = Ledger::open(&paths.ledger, durability)?;
        let chain = ledger.verify_chain(Some(&keyring));
        if !chain.valid {
            return Err(Error::ChainInvalid {
                first_bad_seq: chain.first_bad_seq.unwrap_or(0),
                detail: chain
                    .detail
                    .unwrap_or_else(|| "chain verification failed".into()),
            });
        }

        let embedder = HashEmbedder::new(cfg.embedding_dim)?;
        let mut state = rebuild_state(&ledger, embedder)?;
        if paths.snapshot.exists() {
            let snapshot = MemoryState::import_snapshot(&paths.snapshot)?;
            state.set_clock(state.clock().max(snapshot.clock()));
            let stamps: Vec<(u64, u64)> = snapshot
                .units()
                .filter(|u| state.get(u.idx).is_some())
                .map(|u| (u.idx, u.last_used_at))
                .collect();
            for (idx, last_used_at) in stamps {
                if last_used_at > state.get(idx).expect("filtered").last_used_at {
                    let clock = state.clock();
                    state.set_clock(last_used_at);
                    state.touch(idx)?;
                    state.set_clock(clock);
                }
            }
        }

        let gate = WriteGate::with_slot_oracle(
            cfg.multi_valued_attributes.clone(),
            SYSTEM_SOURCE,
        );
        Ok(Engine {
            cfg,
            paths,
            keyring,
            policy,
            ledger,
            state,
            gate,
        })
    }

    pub fn cfg(&self) -> &Config {
        &self.cfg
    }

    pub fn paths(&self) -> &StorePaths {
        &self.paths
    }

    pub fn state(&self) -> &MemoryState {
        &self.state
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn keyring(&self) -> &Keyring {
        &self.keyring
    }

    /// Registers a new source key and persists the keyring. Re-registering
    /// an existing source is a no-op: rotating the key here would orphan the
    /// provenance tags on every entry that source has already written.
    pub fn register_source(&mut self, source_id: &str) -> Result<()> {
        if self.keyring.contains(source_id) {
            return Ok(());
        }
        self.keyring.register(source_id);
        self.keyring.save(&self.paths.keyring)
    }

    /// Replaces the live policy and persists it.
    pub fn install_policy(&mut self, policy: AccessPolicy) -> Result<()> {
        policy.save(&self.paths.policy)?;
        self.policy = policy;
        Ok(())
    }

    pub fn export_snapshot(&self) -> Result<()> {
        self.state.export_snapshot(&self.paths.snapshot)
    }

    /// One reconciliation pass at the current turn, report appended to the
    /// data directory's CSV, stale units swept afterwards.
    pub fn reconcile_now(&mut self) -> Result<ReconcileReport> {
        let step = self.state.clock();
        let report =
            reconciler::reconcile(&mut self.state, &self.ledger, &self.cfg.reconcile, step)?;
        reconciler::append_report_csv(&self.paths.reconcile_csv, &report)?;
        read_gate::prune_stale(
            &mut self.state,
            &self.cfg.decay,
            &mut self.ledger,
            &self.keyring,
            SYSTEM_SOURCE,
        )?;
        Ok(report)
    }

    /// Handles one request. Never fails — faults come back as `error`
    /// responses so a server loop cannot be wedged by a bad request.
    pub fn handle(&mut self, req: &Request) -> Response {
        match self.dispatch(req) {
            Ok(resp) => resp,
            Err(e) => Response::error(req.id, e.to_string()),
        }
    }

    fn dispatch(&mut self, req: &Request) -> Result<Response> {
        if self.cfg.require_mac && req.principal != SYSTEM_SOURCE {
            let ok = match &req.mac {
                Some(mac_hex) => {
                    let tag = hex::decode(mac_hex)
                        .map_err(|_| Error::MalformedRequest("mac is not hex".into()))?;
                    self.keyring
                        .verify_tag(&req.principal, &req.mac_input(), &tag)
                        .unwrap_or(false)
                }
                None => false,
            };
            if !ok {
                let mut resp = Response::base(req.id, "denied");
                resp.reason = Some("provenance_invalid".into());
                resp.detail = Some("request mac missing or invalid".into());
                return Ok(resp);
            }
        }
        match req.action.as_str() {
            "add" => {
                let content = required(req, req.content.as_deref(), "content")?;
                let scope = required(req, req.scope.as_deref(), "scope")?;
                self.write(
                    req,
                    DeltaKind::Add {
                        content: content.to_string(),
                        slots: req.slots.clone(),
                        is_core: req.core,
                    },
                    scope.to_string(),
                )
            }
            "update" => {
                let content = required(req, req.content.as_deref(), "content")?;
                let idx = req.idx.ok_or_else(|| {
                    Error::MalformedRequest("update requires `idx`".into())
                })?;
                self.write(
                    req,
                    DeltaKind::Update {
                        idx,
                        content: content.to_string(),
                        slots: req.slots.clone(),
                    },
                    String::new(),
                )
            }
            "delete" => {
                let idx = req.idx.ok_or_else(|| {
                    Error::MalformedRequest("delete requires `idx`".into())
                })?;
                self.write(req, DeltaKind::Delete { idx }, String::new())
            }
            "retrieve" => {
                let query = required(req, req.query.as_deref(), "query")?;
                let mut identity = Identity::new(req.principal.clone());
                for claim in &req.attrs {
                    let Some((a, v)) = claim.split_once('=') else {
                        return Err(Error::MalformedRequest(format!(
                            "attr `{claim}` is not attr=value"
                        )));
                    };
                    identity = identity.with_attr(a, v);
                }
                let k = req.k.unwrap_or(self.cfg.retrieve_k);
                let result = read_gate::retrieve(
                    &mut self.state,
                    query,
                    &identity,
                    k,
                    &self.cfg.decay,
                    &self.policy,
                );
                let mut resp = Response::base(req.id, "ok");
                resp.units = Some(
                    result
                        .units
                        .into_iter()
                        .map(|u| WireUnit {
                            idx: u.idx,
                            similarity: u.similarity,
                            content: u.content,
                            slots: u.slots,
                            scope: u.scope,
                        })
                        .collect(),
                );
                Ok(resp)
            }
            other => Err(Error::MalformedRequest(format!(
                "unknown action `{other}`"
            ))),
        }
    }

    /// Common write path: tick, commit through the configured gate, then
    /// run scheduled maintenance.
    fn write(&mut self, req: &Request, kind: DeltaKind, scope: String) -> Result<Response> {
        let turn = self.state.tick();
        let delta = MemoryDelta {
            kind,
            source_id: req.principal.clone(),
            scope,
            proposed_at: turn,
            privileged: req.privileged,
        };
        let outcome = match self.cfg.gate_mode {
            GateMode::Off => WriteGate::commit_unchecked(
                &delta,
                &mut self.state,
                &mut self.ledger,
                &self.keyring,
            ),
            // Deferred admission is a property of the queue in front of a
            // gate, not of the gate itself; a single engine commits in
            // request order either way.
            GateMode::Sync | GateMode::Async => {
                self.gate
                    .commit(&delta, &mut self.state, &mut self.ledger, &self.keyring)
            }
        }?;
        let response = match outcome {
            CommitOutcome::Admitted { seq, applied } => {
                let mut resp = Response::base(req.id, "ok");
                resp.seq = Some(seq);
                resp.idx = Some(match applied {
                    crate::write_gate::Applied::Added { idx }
                    | crate::write_gate::Applied::Updated { idx }
                    | crate::write_gate::Applied::Deleted { idx } => idx,
                });
                resp
            }
            CommitOutcome::Rejected { seq, decision } => {
                let status = match decision.reason {
                    GateReason::ProvenanceInvalid => "denied",
                    _ => "rejected",
                };
                let mut resp = Response::base(req.id, status);
                resp.seq = Some(seq);
                resp.reason = Some(decision.reason.slug().to_string());
                resp.conflicting_core_idx = decision.conflicting_core_idx;
                resp.detail = decision.note;
                resp
            }
        };
        if reconciler::schedule(self.state.clock(), &self.cfg.reconcile) {
            self.reconcile_now()?;
        }
        Ok(response)
    }
}

fn required<'a>(req: &Request, field: Option<&'a str>, name: &str) -> Result<&'a str> {
    field.ok_or_else(|| {
        Error::MalformedRequest(format!("{} requires `{name}`", req.action))
    })
}

// ---------------------------------------------------------------------------
// TCP server
// ---------------------------------------------------------------------------

/// Serves an engine over newline-delimited JSON. One thread per connection;
/// requests execute under the engine lock in arrival order. Returns once
/// `shutdown` is set (connections are given a grace period to finish their
/// current request) after exporting a snapshot.
pub fn serve(
    engine: Arc<Mutex<Engine>>,
    listener: TcpListener,
    shutdown: Arc<AtomicBool>,
) -> Result<()> {
    listener.set_nonblocking(true)?;
    let mut handlers: Vec<std::thread::JoinHandle<()>> = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _addr)) => {
                let engine = Arc::clone(&engine);
                let shutdown = Arc::clone(&shutdown);
                handlers.push(std::thread::spawn(move || {
                    let _ = handle_connection(stream, engine, shutdown);
                }));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(25));
            }
            Err(e) => return Err(e.into()),
        }
        handlers.retain(|h| !h.is_finished());
    }
    for h in handlers {
        let _ = h.join();
    }
    let engine = engine.lock().expect("engine lock");
    engine.export_snapshot()?;
    Ok(())
}

fn handle_connection(
    stream: TcpStream,
    engine: Arc<Mutex<Engine>>,
    shutdown: Arc<AtomicBool>,
) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_millis(100)))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    loop {
        if shutdown.load(Ordering::SeqCst) {
            return Ok(());
        }
        match reader.read_line(&mut line) {
            Ok(0) => return Ok(()), // client hung up
            Ok(_) => {
                let trimmed = line.trim();
                if !trimmed.is_empty() {
                    let response = match serde_json::from_str::<Request>(trimmed) {
                        Ok(req) => engine.lock().expect("engine lock").handle(&req),
                        Err(e) => Response::error(None, format!("malformed request: {e}")),
                    };
                    let mut out =
                        serde_json::to_string(&response).expect("responses always serialize");
                    out.push('\n');
                    writer.write_all(out.as_bytes())?;
                    writer.flush()?;
                }
                line.clear();
            }
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                // A read timeout is how the shutdown flag gets polled, but
                // it can also cut a slow client's line in half — whatever
                // was read stays in `line` so the next pass completes it.
                continue;
            }
            Err(e) => return Err(e),
        }
    }
}
