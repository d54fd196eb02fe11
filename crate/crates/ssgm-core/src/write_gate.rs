//! The write gate: admission control for every mutation of active memory.
//!
//! A proposed change ([`MemoryDelta`]) passes through, in order:
//!
//! 1. **provenance** — the source must hold a registered signing key;
//! 2. **core protection** — only privileged deltas may update or delete a
//!    core unit;
//! 3. **contradiction** — the delta's slots are checked against the core
//!    units by a pluggable [`ContradictionOracle`].
//!
//! Admitted deltas are recorded to the ledger *first* and applied to active
//! memory second, so active memory never holds a fact the ledger cannot
//! account for. Rejected deltas are not dropped silently: each one leaves a
//! rejection entry written under the reserved system source, making the
//! gate's refusals as auditable as its admissions.
//!
//! [`AsyncGate`] wraps the same commit logic behind a queue: callers get an
//! acknowledgement ticket immediately and a single worker thread performs
//! the identical validate→record→apply sequence in submission order.
//! Draining the queue therefore yields bit-for-bit the ledger and state a
//! synchronous run would have produced — the price is that an acknowledged
//! but undrained delta is not yet durable.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::error::{Error, Result};
use crate::keyring::Keyring;
use crate::ledger::{EntryKind, Ledger, Triple};
use crate::store::{MemoryState, MemoryUnit, UnitDraft};

// ---------------------------------------------------------------------------
// Deltas and decisions
// ---------------------------------------------------------------------------

/// The mutation being proposed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeltaKind {
    Add {
        content: String,
        slots: Vec<Triple>,
        is_core: bool,
    },
    Update {
        idx: u64,
        content: String,
        slots: Vec<Triple>,
    },
    Delete {
        idx: u64,
    },
}

/// A proposed change plus the context the gate judges it in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryDelta {
    pub kind: DeltaKind,
    pub source_id: String,
    /// Scope for a new unit; ignored for update/delete (their scope is the
    /// existing unit's).
    pub scope: String,
    /// Logical turn of the proposal. The caller ticks the state clock to
    /// this value before committing; entry timestamps and unit stamps both
    /// derive from it, which is what keeps replay and deferred application
    /// exact.
    pub proposed_at: u64,
    /// Privileged deltas may correct or retire core units.
    pub privileged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateReason {
    Clean,
    ContradictsCore,
    ProvenanceInvalid,
    /// The contradiction oracle itself failed; the delta is rejected rather
    /// than admitted unchecked.
    OracleFailure,
}

impl GateReason {
    pub fn slug(self) -> &'static str {
        match self {
            GateReason::Clean => "clean",
            GateReason::ContradictsCore => "contradicts_core",
            GateReason::ProvenanceInvalid => "provenance_invalid",
            GateReason::OracleFailure => "oracle_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateDecision {
    pub admitted: bool,
    pub reason: GateReason,
    /// The core unit a rejection is anchored to, when there is one.
    pub conflicting_core_idx: Option<u64>,
    pub note: Option<String>,
}

impl GateDecision {
    fn clean() -> Self {
        GateDecision {
            admitted: true,
            reason: GateReason::Clean,
            conflicting_core_idx: None,
            note: None,
        }
    }

    fn rejected(reason: GateReason, core_idx: Option<u64>, note: Option<String>) -> Self {
        GateDecision {
            admitted: false,
            reason,
            conflicting_core_idx: core_idx,
            note,
        }
    }
}

/// What an admitted delta did to active memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Added { idx: u64 },
    Updated { idx: u64 },
    Deleted { idx: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommitOutcome {
    /// Recorded at `seq` and applied.
    Admitted { seq: u64, applied: Applied },
    /// Refused; the audit trail entry sits at `seq`.
    Rejected { seq: u64, decision: GateDecision },
}

// ---------------------------------------------------------------------------
// Contradiction oracles
// ---------------------------------------------------------------------------

/// A slot-level contradiction found against a core unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub core_idx: u64,
    pub proposed: Triple,
    pub existing: Triple,
}

/// Decides whether proposed slots contradict the core facts. Failure (`Err`)
/// is a first-class outcome: the gate rejects rather than guessing.
pub trait ContradictionOracle: Send + Sync {
    fn check(
        &self,
        proposed: &[Triple],
        cores: &[&MemoryUnit],
    ) -> std::result::Result<Option<Conflict>, String>;
}

/// The built-in oracle: a proposed slot contradicts a core slot when they
/// share subject and attribute but disagree on value — unless the attribute
/// is declared multi-valued (e.g. `hobby`), in which case values coexist.
/// Scans proposed slots in order, core units in idx order, core slots in
/// order, and reports the first hit, so the blamed core idx is
/// deterministic.
#[derive(Debug, Clone, Default)]
pub struct SlotOracle {
    pub multi_valued: BTreeSet<String>,
}

impl SlotOracle {
    pub fn new(multi_valued: BTreeSet<String>) -> Self {
        SlotOracle { multi_valued }
    }
}

impl ContradictionOracle for SlotOracle {
    fn check(
        &self,
        proposed: &[Triple],
        cores: &[&MemoryUnit],
    ) -> std::result::Result<Option<Conflict>, String> {
        for p in proposed {
            if self.multi_valued.contains(&p.attribute) {
                continue;
            }
            for core in cores {
                for existing in &core.slots {
                    if existing.subject == p.subject
                        && existing.attribute == p.attribute
                        && existing.value != p.value
                    {
                        return Ok(Some(Conflict {
                            core_idx: core.idx,
                            proposed: p.clone(),
                            existing: existing.clone(),
                        }));
                    }
                }
            }
        }
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// The gate
// ---------------------------------------------------------------------------

pub struct WriteGate {
    oracle: Box<dyn ContradictionOracle>,
    system_source: String,
}

impl std::fmt::Debug for WriteGate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WriteGate")
            .field("system_source", &self.system_source)
            .finish_non_exhaustive()
    }
}

impl WriteGate {
    pub fn new(oracle: Box<dyn ContradictionOracle>, system_source: impl Into<String>) -> Self {
        WriteGate {
            oracle,
            system_source: system_source.into(),
        }
    }

    /// A gate running the built-in [`SlotOracle`].
    pub fn with_slot_oracle(
        multi_valued: BTreeSet<String>,
        system_source: impl Into<String>,
    ) -> Self {
        WriteGate::new(Box::new(SlotOracle::new(multi_valued)), system_source)
    }

    pub fn system_source(&self) -> &str {
        &self.system_source
    }

    /// Judges a delta without touching anything. `Err` is reserved for
    /// malformed proposals (an update/delete of an idx that does not
    /// exist); every judgement call comes back as a [`GateDecision`].
    pub fn validate(
        &self,
        delta: &MemoryDelta,
        state: &MemoryState,
        keyring: &Keyring,
    ) -> Result<GateDecision> {
        if !keyring.contains(&delta.source_id) {
            return Ok(GateDecision::rejected(
                GateReason::ProvenanceInvalid,
                None,
                Some(format!("source `{}` holds no key", delta.source_id)),
            ));
        }
        let target = match &delta.kind {
            DeltaKind::Add { .. } => None,
            DeltaKind::Update { idx, .. } | DeltaKind::Delete { idx } => {
                let unit = state.get(*idx).ok_or(Error::UnknownIdx(*idx))?;
                if unit.is_core && !delta.privileged {
                    return Ok(GateDecision::rejected(
                        GateReason::ContradictsCore,
                        Some(*idx),
                        Some("core units require a privileged delta".into()),
                    ));
                }
                Some(*idx)
            }
        };
        let proposed: &[Triple] = match &delta.kind {
            DeltaKind::Add { slots, .. } => slots,
            DeltaKind::Update { slots, .. } => slots,
            DeltaKind::Delete { .. } => &[],
        };
        if proposed.is_empty() {
            return Ok(GateDecision::clean());
        }
        // An update is allowed to disagree with the unit it is revising —
        // that is what updating means — but not with any *other* core.
        let cores: Vec<&MemoryUnit> = state
            .core_units()
            .filter(|u| Some(u.idx) != target)
            .collect();
        match self.oracle.check(proposed, &cores) {
            Ok(None) => Ok(GateDecision::clean()),
            Ok(Some(conflict)) => Ok(GateDecision::rejected(
                GateReason::ContradictsCore,
                Some(conflict.core_idx),
                Some(format!(
                    "`{} {} = {}` contradicts core `{} {} = {}`",
                    conflict.proposed.subject,
                    conflict.proposed.attribute,
                    conflict.proposed.value,
                    conflict.existing.subject,
                    conflict.existing.attribute,
                    conflict.existing.value,
                )),
            )),
            Err(msg) => Ok(GateDecision::rejected(
                GateReason::OracleFailure,
                None,
                Some(msg),
            )),
        }
    }

    /// Validates, records, and applies a delta. Admission writes the action
    /// entry (tagged by the proposing source) and then mutates state;
    /// rejection writes an audit entry under the system source and leaves
    /// state untouched. The caller must have ticked the state clock to
    /// `delta.proposed_at`.
    pub fn commit(
        &self,
        delta: &MemoryDelta,
        state: &mut MemoryState,
        ledger: &mut Ledger,
        keyring: &Keyring,
    ) -> Result<CommitOutcome> {
        let decision = self.validate(delta, state, keyring)?;
        if !decision.admitted {
            let action = match &delta.kind {
                DeltaKind::Add { .. } => "add".to_string(),
                DeltaKind::Update { idx, .. } => format!("update idx={idx}"),
                DeltaKind::Delete { idx } => format!("delete idx={idx}"),
            };
            let mut summary = format!(
                "rejected {action} from `{}`: {}",
                delta.source_id,
                decision.reason.slug()
            );
            if let Some(note) = &decision.note {
                summary.push_str(" — ");
                summary.push_str(note);
            }
            let proposed = match &delta.kind {
                DeltaKind::Add { slots, .. } | DeltaKind::Update { slots, .. } => slots.clone(),
                DeltaKind::Delete { .. } => vec![],
            };
            let seq = ledger.append_entry(
                keyring,
                EntryKind::Rejection {
                    reason: decision.reason.slug().to_string(),
                    revert_of: None,
                },
                &summary,
                proposed,
                &self.system_source,
                &delta.scope,
                delta.proposed_at,
            )?;
            return Ok(CommitOutcome::Rejected { seq, decision });
        }
        apply_admitted(delta, state, ledger, keyring)
    }

    /// Records and applies with the gate held open — no provenance check
    /// beyond the source needing a signing key, no contradiction check.
    /// This is the ungoverned baseline the governed modes are measured
    /// against.
    pub fn commit_unchecked(
        delta: &MemoryDelta,
        state: &mut MemoryState,
        ledger: &mut Ledger,
        keyring: &Keyring,
    ) -> Result<CommitOutcome> {
        match &delta.kind {
            DeltaKind::Update { idx, .. } | DeltaKind::Delete { idx } => {
                if state.get(*idx).is_none() {
                    return Err(Error::UnknownIdx(*idx));
                }
            }
            DeltaKind::Add { .. } => {}
        }
        apply_admitted(delta, state, ledger, keyring)
    }
}

/// Shared record-then-apply tail for every admission path.
fn apply_admitted(
    delta: &MemoryDelta,
    state: &mut MemoryState,
    ledger: &mut Ledger,
    keyring: &Keyring,
) -> Result<CommitOutcome> {
    match &delta.kind {
        DeltaKind::Add {
            content,
            slots,
            is_core,
        } => {
            let seq = ledger.append_entry(
                keyring,
                EntryKind::Add { core: *is_core },
                content,
                slots.clone(),
                &delta.source_id,
                &delta.scope,
                delta.proposed_at,
            )?;
            let idx = state.insert(
                UnitDraft {
                    content: content.clone(),
                    slots: slots.clone(),
                    scope: delta.scope.clone(),
                    source_id: delta.source_id.clone(),
                    origin_seqs: vec![seq],
                    is_core: *is_core,
                },
                ledger.last_seq(),
            )?;
            Ok(CommitOutcome::Admitted {
                seq,
                applied: Applied::Added { idx },
            })
        }
        DeltaKind::Update {
            idx,
            content,
            slots,
        } => {
            let scope = state
                .get(*idx)
                .ok_or(Error::UnknownIdx(*idx))?
                .scope
                .clone();
            let seq = ledger.append_entry(
                keyring,
                EntryKind::Update { idx: *idx },
                content,
                slots.clone(),
                &delta.source_id,
                &scope,
                delta.proposed_at,
            )?;
            state.update(*idx, content, slots.clone(), seq)?;
            Ok(CommitOutcome::Admitted {
                seq,
                applied: Applied::Updated { idx: *idx },
            })
        }
        DeltaKind::Delete { idx } => {
            let scope = state
                .get(*idx)
                .ok_or(Error::UnknownIdx(*idx))?
                .scope
                .clone();
            let seq = ledger.append_entry(
                keyring,
                EntryKind::Delete { idx: *idx },
                "",
                vec![],
                &delta.source_id,
                &scope,
                delta.proposed_at,
            )?;
            state.delete(*idx);
            Ok(CommitOutcome::Admitted {
                seq,
                applied: Applied::Deleted { idx: *idx },
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Asynchronous admission
// ---------------------------------------------------------------------------

enum Job {
    Delta(MemoryDelta),
    Barrier(mpsc::SyncSender<()>),
}

/// The write gate behind a queue. [`AsyncGate::submit`] acknowledges
/// immediately with a ticket; a single worker drains the queue in FIFO
/// order running the exact synchronous commit, so after [`AsyncGate::drain`]
/// the ledger and state match a synchronous run of the same deltas
/// bit for bit. Acknowledged-but-undrained deltas are lost on a crash —
/// that is the latency trade this mode exists to make.
pub struct AsyncGate {
    tx: Option<mpsc::Sender<Job>>,
    worker: Option<JoinHandle<()>>,
    tickets: AtomicU64,
    first_error: Arc<Mutex<Option<Error>>>,
}

impl AsyncGate {
    pub fn spawn(
        gate: Arc<WriteGate>,
        state: Arc<Mutex<MemoryState>>,
        ledger: Arc<Mutex<Ledger>>,
        keyring: Arc<Keyring>,
    ) -> Self {
        let (tx, rx) = mpsc::channel::<Job>();
        let first_error: Arc<Mutex<Option<Error>>> = Arc::default();
        let sink = Arc::clone(&first_error);
        let worker = std::thread::spawn(move || {
            for job in rx {
                match job {
                    Job::Delta(delta) => {
                        let mut state = state.lock().expect("state lock");
                        let mut ledger = ledger.lock().expect("ledger lock");
                        // Replay exactness: apply at the turn the delta was
                        // acknowledged, then restore the (never-smaller)
                        // current clock.
                        let now = state.clock();
                        state.set_clock(delta.proposed_at);
                        let outcome = gate.commit(&delta, &mut state, &mut ledger, &keyring);
                        state.set_clock(now.max(delta.proposed_at));
                        if let Err(e) = outcome {
                            sink.lock().expect("error slot").get_or_insert(e);
                        }
                    }
                    Job::Barrier(done) => {
                        let _ = done.send(());
                    }
                }
            }
        });
        AsyncGate {
            tx: Some(tx),
            worker: Some(worker),
            tickets: AtomicU64::new(0),
            first_error,
        }
    }

    /// Enqueues a delta and acknowledges with a ticket. No validation, no
    /// I/O — this is the fast path being measured.
    pub fn submit(&self, delta: MemoryDelta) -> u64 {
        self.tx
            .as_ref()
            .expect("gate not shut down")
            .send(Job::Delta(delta))
            .expect("worker alive");
        self.tickets.fetch_add(1, Ordering::Relaxed)
    }

    /// Blocks until every delta submitted so far has been committed, then
    /// surfaces the first worker error if any occurred.
    pub fn drain(&self) -> Result<()> {
        let (done_tx, done_rx) = mpsc::sync_channel(0);
        self.tx
            .as_ref()
            .expect("gate not shut down")
            .send(Job::Barrier(done_tx))
            .expect("worker alive");
        done_rx.recv().expect("worker alive");
        self.take_error()
    }

    fn take_error(&self) -> Result<()> {
        match self.first_error.lock().expect("error slot").take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Drains, stops the worker, and joins it.
    pub fn shutdown(mut self) -> Result<()> {
        let result = self.drain();
        self.tx = None; // closing the channel ends the worker loop
        if let Some(worker) = self.worker.take() {
            worker.join().expect("worker panicked");
        }
        result
    }
}

impl Drop for AsyncGate {
    fn drop(&mut self) {
        self.tx = None;
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

    struct FailingOracle;
    impl ContradictionOracle for FailingOracle {
        fn check(
            &self,
            _proposed: &[Triple],
            _cores: &[&MemoryUnit],
        ) -> std::result::Result<Option<Conflict>, String> {
            Err("oracle backend unreachable".into())
        }
    }

    fn keyring() -> Keyring {
        let mut kr = Keyring::new();
        kr.register_with_key("alice", [1u8; 32]);
        kr.register_with_key("system", [3u8; 32]);
        kr
    }

    fn gate() -> WriteGate {
        WriteGate::with_slot_oracle(BTreeSet::new(), "system")
    }

    fn add(content: &str, slots: Vec<Triple>, is_core: bool) -> MemoryDelta {
        MemoryDelta {
            kind: DeltaKind::Add {
                content: content.into(),
                slots,
                is_core,
            },
            source_id: "alice".into(),
            scope: "team".into(),
            proposed_at: 0,
            privileged: false,
        }
    }

    /// State with one core fact `user city = Paris` (idx 0) plus the
    /// ledger/keyring around it.
    fn seeded() -> (WriteGate, MemoryState, Ledger, Keyring) {
        let kr = keyring();
        let g = gate();
        let mut state = MemoryState::new(HashEmbedder::default());
        let mut ledger = Ledger::in_memory();
        let delta = add(
            "user lives in Paris",
            vec![Triple::new("user", "city", "Paris")],
            true,
        );
        g.commit(&delta, &mut state, &mut ledger, &kr).unwrap();
        (g, state, ledger, kr)
    }

    #[test]
    fn clean_add_records_then_applies() {
        let (g, mut state, mut ledger, kr) = seeded();
        state.set_clock(1);
        let mut delta = add("likes tea", vec![Triple::new("user", "drink", "tea")], false);
        delta.proposed_at = 1;
        let outcome = g.commit(&delta, &mut state, &mut ledger, &kr).unwrap();
        let CommitOutcome::Admitted { seq, applied } = outcome else {
            panic!("expected admission, got {outcome:?}");
        };
        assert_eq!(seq, 1);
        assert_eq!(applied, Applied::Added { idx: 1 });
        let unit = state.get(1).unwrap();
        assert_eq!(unit.origin_seqs, vec![1]);
        assert_eq!(unit.created_at, 1);
        assert_eq!(ledger.get(1).unwrap().kind, EntryKind::Add { core: false });
    }

    #[test]
    fn contradicting_add_is_rejected_and_audited() {
        let (g, mut state, mut ledger, kr) = seeded();
        let hash_before = state.content_hash();
        let delta = add(
            "user moved to Lyon",
            vec![Triple::new("user", "city", "Lyon")],
            false,
        );
        let outcome = g.commit(&delta, &mut state, &mut ledger, &kr).unwrap();
        let CommitOutcome::Rejected { seq, decision } = outcome else {
            panic!("expected rejection, got {outcome:?}");
        };
        assert_eq!(decision.reason, GateReason::ContradictsCore);
        assert_eq!(decision.conflicting_core_idx, Some(0));
        // State untouched; refusal recorded under the system source.
        assert_eq!(state.content_hash(), hash_before);
        let entry = ledger.get(seq).unwrap();
        assert_eq!(entry.source_id, "system");
        assert!(matches!(&entry.kind, EntryKind::Rejection { reason, .. } if reason == "contradicts_core"));
        assert!(ledger.verify_chain(Some(&kr)).valid);
    }

    #[test]
    fn multi_valued_attributes_tolerate_divergence() {
        let kr = keyring();
        let g = WriteGate::with_slot_oracle(
            ["hobby".to_string()].into_iter().collect(),
            "system",
        );
        let mut state = MemoryState::new(HashEmbedder::default());
        let mut ledger = Ledger::in_memory();
        g.commit(
            &add("chess", vec![Triple::new("user", "hobby", "chess")], true),
            &mut state,
            &mut ledger,
            &kr,
        )
        .unwrap();
        let outcome = g
            .commit(
                &add("skiing", vec![Triple::new("user", "hobby", "skiing")], false),
                &mut state,
                &mut ledger,
                &kr,
            )
            .unwrap();
        assert!(matches!(outcome, CommitOutcome::Admitted { .. }));
    }

    #[test]
    fn unknown_source_is_denied_before_anything_else() {
        let (g, mut state, mut ledger, kr) = seeded();
        let mut delta = add("x", vec![], false);
        delta.source_id = "mallory".into();
        let outcome = g.commit(&delta, &mut state, &mut ledger, &kr).unwrap();
        let CommitOutcome::Rejected { decision, .. } = outcome else {
            panic!("expected rejection");
        };
        assert_eq!(decision.reason, GateReason::ProvenanceInvalid);
        assert_eq!(state.len(), 1);
    }

    #[test]
    fn core_units_need_privilege_to_change() {
        let (g, mut state, mut ledger, kr) = seeded();
        let mut delta = MemoryDelta {
            kind: DeltaKind::Delete { idx: 0 },
            source_id: "alice".into(),
            scope: "team".into(),
            proposed_at: 1,
            privileged: false,
        };
        let CommitOutcome::Rejected { decision, .. } =
            g.commit(&delta, &mut state, &mut ledger, &kr).unwrap()
        else {
            panic!("unprivileged delete of core must be rejected");
        };
        assert_eq!(decision.reason, GateReason::ContradictsCore);
        assert_eq!(decision.conflicting_core_idx, Some(0));
        assert!(state.get(0).is_some());

        delta.privileged = true;
        let outcome = g.commit(&delta, &mut state, &mut ledger, &kr).unwrap();
        assert!(matches!(
            outcome,
            CommitOutcome::Admitted {
                applied: Applied::Deleted { idx: 0 },
                ..
            }
        ));
        assert!(state.get(0).is_none());
    }

    #[test]
    fn privileged_update_may_revise_its_target_but_not_other_cores() {
        let (g, mut state, mut ledger, kr) = seeded();
        // Second core fact.
        g.commit(
            &add("works at Acme", vec![Triple::new("user", "employer", "Acme")], true),
            &mut state,
            &mut ledger,
            &kr,
        )
        .unwrap();

        // Revising core 0's own slot is what a privileged update is for.
        let revise = MemoryDelta {
            kind: DeltaKind::Update {
                idx: 0,
                content: "user lives in Lyon".into(),
                slots: vec![Triple::new("user", "city", "Lyon")],
            },
            source_id: "alice".into(),
            scope: "team".into(),
            proposed_at: 2,
            privileged: true,
        };
        assert!(matches!(
            g.commit(&revise, &mut state, &mut ledger, &kr).unwrap(),
            CommitOutcome::Admitted { .. }
        ));
        assert_eq!(state.get(0).unwrap().content, "user lives in Lyon");

        // But privilege does not license contradicting a *different* core.
        let clash = MemoryDelta {
            kind: DeltaKind::Update {
                idx: 0,
                content: "user works at Globex".into(),
                slots: vec![Triple::new("user", "employer", "Globex")],
            },
            source_id: "alice".into(),
            scope: "team".into(),
            proposed_at: 3,
            privileged: true,
        };
        let CommitOutcome::Rejected { decision, .. } =
            g.commit(&clash, &mut state, &mut ledger, &kr).unwrap()
        else {
            panic!("cross-core contradiction must be rejected");
        };
        assert_eq!(decision.conflicting_core_idx, Some(1));
    }

    #[test]
    fn unknown_target_is_an_error_and_writes_nothing() {
        let (g, mut state, mut ledger, kr) = seeded();
        let len_before = ledger.len();
        let delta = MemoryDelta {
            kind: DeltaKind::Update {
                idx: 42,
                content: "x".into(),
                slots: vec![],
            },
            source_id: "alice".into(),
            scope: "team".into(),
            proposed_at: 1,
            privileged: false,
        };
        assert!(matches!(
            g.commit(&delta, &mut state, &mut ledger, &kr),
            Err(Error::UnknownIdx(42))
        ));
        assert_eq!(ledger.len(), len_before);
    }

    #[test]
    fn oracle_failure_rejects_rather_than_admitting_unchecked() {
        let kr = keyring();
        let g = WriteGate::new(Box::new(FailingOracle), "system");
        let mut state = MemoryState::new(HashEmbedder::default());
        let mut ledger = Ledger::in_memory();
        let delta = add("x", vec![Triple::new("a", "b", "c")], false);
        let CommitOutcome::Rejected { decision, .. } =
            g.commit(&delta, &mut state, &mut ledger, &kr).unwrap()
        else {
            panic!("oracle failure must reject");
        };
        assert_eq!(decision.reason, GateReason::OracleFailure);
        assert_eq!(decision.note.as_deref(), Some("oracle backend unreachable"));
        assert_eq!(state.len(), 0);
    }

    #[test]
    fn unchecked_commits_admit_contradictions() {
        let (_, mut state, mut ledger, kr) = seeded();
        let delta = add(
            "user moved to Lyon",
            vec![Triple::new("user", "city", "Lyon")],
            false,
        );
        let outcome =
            WriteGate::commit_unchecked(&delta, &mut state, &mut ledger, &kr).unwrap();
        assert!(matches!(outcome, CommitOutcome::Admitted { .. }));
        assert_eq!(state.len(), 2);
    }

    #[test]
    fn drained_async_run_matches_sync_run_exactly() {
        // One workload, committed twice.
        let deltas: Vec<MemoryDelta> = (0..40u64)
            .map(|i| {
                let mut d = match i % 4 {
                    // A core anchor early, clean adds, a contradiction, an update.
                    0 => add(
                        &format!("note {i} alpha"),
                        vec![Triple::new("note", format!("n{i}"), "v")],
                        i == 0,
                    ),
                    1 => add(&format!("note {i} beta"), vec![], false),
                    2 => add(
                        "user city changed",
                        vec![Triple::new("note", "n0", "other")],
                        false,
                    ),
                    _ => MemoryDelta {
                        kind: DeltaKind::Update {
                            idx: 0,
                            content: format!("note 0 revised at {i}"),
                            slots: vec![],
                        },
                        source_id: "alice".into(),
                        scope: "team".into(),
                        proposed_at: 0,
                        privileged: true,
                    },
                };
                d.proposed_at = i + 1;
                d
            })
            .collect();

        // Synchronous reference run.
        let kr = keyring();
        let g = gate();
        let mut sync_state = MemoryState::new(HashEmbedder::default());
        let mut sync_ledger = Ledger::in_memory();
        for d in &deltas {
            sync_state.set_clock(d.proposed_at);
            let _ = g.commit(d, &mut sync_state, &mut sync_ledger, &kr);
        }

        // Deferred run of the same deltas.
        let state = Arc::new(Mutex::new(MemoryState::new(HashEmbedder::default())));
        let ledger = Arc::new(Mutex::new(Ledger::in_memory()));
        let agate = AsyncGate::spawn(
            Arc::new(gate()),
            Arc::clone(&state),
            Arc::clone(&ledger),
            Arc::new(keyring()),
        );
        for d in &deltas {
            state.lock().unwrap().set_clock(d.proposed_at);
            agate.submit(d.clone());
        }
        agate.shutdown().unwrap();

        let async_state = state.lock().unwrap();
        let async_ledger = ledger.lock().unwrap();
        assert_eq!(async_state.content_hash(), sync_state.content_hash());
        assert_eq!(async_state.clock(), sync_state.clock());
        // Not merely equivalent state: the identical chain of records.
        assert_eq!(async_ledger.tip_hash(), sync_ledger.tip_hash());
        assert_eq!(async_ledger.len(), sync_ledger.len());
    }

    #[test]
    fn async_worker_errors_surface_on_drain() {
        let kr = keyring();
        let state = Arc::new(Mutex::new(MemoryState::new(HashEmbedder::default())));
        let ledger = Arc::new(Mutex::new(Ledger::in_memory()));
        let agate = AsyncGate::spawn(
            Arc::new(gate()),
            Arc::clone(&state),
            Arc::clone(&ledger),
            Arc::new(kr),
        );
        agate.submit(MemoryDelta {
            kind: DeltaKind::Delete { idx: 7 },
            source_id: "alice".into(),
            scope: "team".into(),
            proposed_at: 1,
            privileged: false,
        });
        let err = agate.shutdown().unwrap_err();
        assert!(matches!(err, Error::UnknownIdx(7)));
    }
}
