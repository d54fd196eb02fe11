//! Latency experiment: what does admission control cost on the write path?
//!
//! The same workload runs three times against a real file-backed ledger:
//!
//! * `off`   — every delta is recorded and applied with no checks;
//! * `sync`  — the write gate validates inline before acknowledging;
//! * `async` — the write is acknowledged on enqueue and a worker runs the
//!             same synchronous commit behind the caller's back.
//!
//! Only the foreground of each write is timed, which is exactly what a
//! caller observes. The interesting orderings: `sync` can never beat
//! `off` (it does strictly more work before acknowledging), and `async`
//! acknowledgement is decoupled from commit cost entirely — but after a
//! drain its ledger and state must be bit-identical to the synchronous
//! run's, because deferral is a queueing decision, not a different gate.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::GateMode;
use crate::embedding::HashEmbedder;
use crate::error::Result;
use crate::keyring::Keyring;
use crate::ledger::{Durability, EntryKind, Ledger, Triple};
use crate::reconciler::state_reference_text;
use crate::sim::{derived_key, VOCAB};
use crate::store::MemoryState;
use crate::write_gate::{AsyncGate, DeltaKind, MemoryDelta, WriteGate};

const WORKLOAD_SALT: u64 = 0x6c61_7465_6e63_7931;
const PRESEED_SALT: u64 = 0x6c61_7465_7365_6564;
const SOURCE: &str = "writer";
const SYSTEM: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyConfig {
    pub writes: usize,
    /// Protected facts the contradiction slice of the workload attacks.
    pub core_facts: usize,
    /// Ordinary units the update slice of the workload revises.
    pub seeded_units: usize,
    pub seed: u64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            writes: 5_000,
            core_facts: 8,
            seeded_units: 32,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyOutcome {
    pub mode: GateMode,
    pub p50_us: f64,
    pub p95_us: f64,
    pub mean_us: f64,
    /// Drift between the final store and what the ledger says it should
    /// hold. Zero in every mode — even the ungoverned baseline records
    /// faithfully; it just refuses nothing.
    pub final_delta: f64,
    /// Hex of the usage-independent store digest.
    pub state_hash: String,
    /// Hex of the ledger tip hash.
    pub tip: String,
    pub admitted: u64,
    pub rejected: u64,
}

fn preseed_len(cfg: &LatencyConfig) -> u64 {
    (cfg.core_facts + cfg.seeded_units) as u64
}

/// Installs the shared starting population: `core_facts` protected slot
/// facts, then `seeded_units` ordinary notes. Deterministic per seed, so
/// every mode starts from the same store and ledger prefix.
fn preseed(
    cfg: &LatencyConfig,
    state: &mut MemoryState,
    ledger: &mut Ledger,
    keyring: &Keyring,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ PRESEED_SALT);
    let mut turn = 0u64;
    let commit = |delta: &MemoryDelta, state: &mut MemoryState, ledger: &mut Ledger| {
        WriteGate::commit_unchecked(delta, state, ledger, keyring).map(|_| ())
    };
    for j in 0..cfg.core_facts {
        turn += 1;
        state.set_clock(turn);
        let delta = MemoryDelta {
            kind: DeltaKind::Add {
                content: format!("established fact {j} holds value v-{j}"),
                slots: vec![Triple::new(format!("fact-{j}"), "value", format!("v-{j}"))],
                is_core: true,
            },
            source_id: SOURCE.into(),
            scope: "main".into(),
            proposed_at: turn,
            privileged: false,
        };
        commit(&delta, state, ledger)?;
    }
    for j in 0..cfg.seeded_units {
        turn += 1;
        state.set_clock(turn);
        let words: Vec<&str> = (0..5).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect();
        let delta = MemoryDelta {
            kind: DeltaKind::Add {
                content: format!("note-{j} {}", words.join(" ")),
                slots: vec![],
                is_core: false,
            },
            source_id: SOURCE.into(),
            scope: "main".into(),
            proposed_at: turn,
            privileged: false,
        };
        commit(&delta, state, ledger)?;
    }
    Ok(())
}

/// Builds the write mix once; every mode replays the identical deltas.
/// Roughly 90% clean adds, 5% adds that contradict a protected fact, and
/// 5% updates of seeded notes. Turn numbers are baked in so the clock
/// advances identically everywhere.
fn build_workload(cfg: &LatencyConfig) -> Vec<MemoryDelta> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ WORKLOAD_SALT);
    let base_turn = preseed_len(cfg);
    (0..cfg.writes)
        .map(|i| {
            let roll: f64 = rng.random();
            let words: Vec<&str> =
                (0..6).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect();
            let content = words.join(" ");
            let kind = if roll < 0.05 {
                let j = rng.random_range(0..cfg.core_facts);
                DeltaKind::Add {
                    content,
                    slots: vec![Triple::new(format!("fact-{j}"), "value", "WRONG")],
                    is_core: false,
                }
            } else if roll < 0.10 {
                let idx = (cfg.core_facts + rng.random_range(0..cfg.seeded_units)) as u64;
                DeltaKind::Update {
                    idx,
                    content,
                    slots: vec![],
                }
            } else {
                DeltaKind::Add {
                    content,
                    slots: vec![Triple::new(format!("note-{i}"), "value", words[0])],
                    is_core: false,
                }
            };
            MemoryDelta {
                kind,
                source_id: SOURCE.into(),
                scope: "main".into(),
                proposed_at: base_turn + 1 + i as u64,
                privileged: false,
            }
        })
        .collect()
}

/// Nearest-rank percentile over an ascending sample.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn finish(
    mode: GateMode,
    mut micros: Vec<f64>,
    state: &MemoryState,
    ledger: &Ledger,
    preseeded: u64,
) -> Result<LatencyOutcome> {
    let mean_us = micros.iter().sum::<f64>() / micros.len().max(1) as f64;
    micros.sort_by(f64::total_cmp);
    let (mut admitted, mut rejected) = (0u64, 0u64);
    for entry in ledger.entries().iter().skip(preseeded as usize) {
        match entry.kind {
            EntryKind::Rejection { .. } => rejected += 1,
            _ => admitted += 1,
        }
    }
    let reference = state_reference_text(state, ledger)?;
    Ok(LatencyOutcome {
        mode,
        p50_us: percentile(&micros, 50.0),
        p95_us: percentile(&micros, 95.0),
        mean_us,
        final_delta: crate::embedding::drift_under(
            state.embedder(),
            &state.canonical_text(),
            &reference,
        ),
        state_hash: hex::encode(state.content_hash()),
        tip: hex::encode(ledger.tip_hash()),
        admitted,
        rejected,
    })
}

/// Runs the workload under one gate mode against a fresh file ledger at
/// `work_dir/latency-{mode}.jsonl`.
pub fn run_latency_mode(
    cfg: &LatencyConfig,
    mode: GateMode,
    work_dir: &Path,
) -> Result<LatencyOutcome> {
    let workload = build_workload(cfg);
    let path = work_dir.join(format!("latency-{}.jsonl", mode.name()));
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    let mut keyring = Keyring::new();
    keyring.register_with_key(SOURCE, derived_key(SOURCE, cfg.seed));
    keyring.register_with_key(SYSTEM, derived_key(SYSTEM, cfg.seed));
    let mut state = MemoryState::new(HashEmbedder::default());
    let mut ledger = Ledger::open(&path, Durability::Flush)?;
    preseed(cfg, &mut state, &mut ledger, &keyring)?;

    let mut micros = Vec::with_capacity(workload.len());
    match mode {
        GateMode::Off => {
            for delta in &workload {
                state.set_clock(delta.proposed_at);
                let t = Instant::now();
                WriteGate::commit_unchecked(delta, &mut state, &mut ledger, &keyring)?;
                micros.push(t.elapsed().as_nanos() as f64 / 1000.0);
            }
            finish(mode, micros, &state, &ledger, preseed_len(cfg))
        }
        GateMode::Sync => {
            let gate = WriteGate::with_slot_oracle(BTreeSet::new(), SYSTEM);
            for delta in &workload {
                state.set_clock(delta.proposed_at);
                let t = Instant::now();
                gate.commit(delta, &mut state, &mut ledger, &keyring)?;
                micros.push(t.elapsed().as_nanos() as f64 / 1000.0);
            }
            finish(mode, micros, &state, &ledger, preseed_len(cfg))
        }
        GateMode::Async => {
            let gate = Arc::new(WriteGate::with_slot_oracle(BTreeSet::new(), SYSTEM));
            let state = Arc::new(Mutex::new(state));
            let ledger = Arc::new(Mutex::new(ledger));
            let agate = AsyncGate::spawn(
                gate,
                Arc::clone(&state),
                Arc::clone(&ledger),
                Arc::new(keyring),
            );
            for delta in workload {
                let t = Instant::now();
                agate.submit(delta);
                micros.push(t.elapsed().as_nanos() as f64 / 1000.0);
            }
            agate.shutdown()?;
            // The worker joined, so these Arcs are ours alone again.
            let state = Arc::try_unwrap(state)
                .ok()
                .expect("worker gone")
                .into_inner()
                .expect("state lock");
            let ledger = Arc::try_unwrap(ledger)
                .ok()
                .expect("worker gone")
                .into_inner()
                .expect("ledger lock");
            finish(mode, micros, &state, &ledger, preseed_len(cfg))
        }
    }
}

/// Runs all three modes in a fixed order.
pub fn run_latency(cfg: &LatencyConfig, work_dir: &Path) -> Result<Vec<LatencyOutcome>> {
    [GateMode::Off, GateMode::Sync, GateMode::Async]
        .into_iter()
        .map(|mode| run_latency_mode(cfg, mode, work_dir))
        .collect()
}

/// Writes `mode,p50_us,p95_us,mean_us,final_delta` rows.
pub fn write_csv(outcomes: &[LatencyOutcome], path: &Path) -> Result<()> {
    let mut out = String::from("mode,p50_us,p95_us,mean_us,final_delta\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            o.mode.name(),
            o.p50_us,
            o.p95_us,
            o.mean_us,
            o.final_delta
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
