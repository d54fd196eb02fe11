//! Periodic reconciliation: re-derives active memory from the ledger.
//!
//! Active memory is mutable and therefore corruptible — lossy rewrites,
//! bugs, bit rot. The ledger is neither. Every `period_n` turns the
//! reconciler recomputes each unit's *reference* content from the ledger
//! entries its current content derives from, and rewrites units that have
//! drifted. An ungoverned store accumulates error across the whole run; a
//! reconciled store can only accumulate error since the last reconcile
//! window, which is the drift bound the simulations measure.
//!
//! The reconciler never writes the ledger — it takes `&Ledger`, so the
//! borrow checker enforces what the design promises — and it refuses to
//! trust a ledger whose chain does not verify: repairing memory from
//! corrupted ground truth would launder the corruption.

use std::io::Write;
use std::path::Path;

use crate::embedding::{drift_under, mean_of};
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::store::{MemoryState, MemoryUnit};

/// How aggressively corrections are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconcileMode {
    /// Rewrite a unit only when its drift from reference exceeds the
    /// threshold; tolerates small divergence, touches less state.
    PerUnitCorrect,
    /// Rewrite every unit whose content differs at all from its reference.
    FullRebuild,
}

/// Which state-level drift number goes in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateMetric {
    /// Cosine drift between the concatenated unit texts and the
    /// concatenated reference texts (idx order).
    ConcatText,
    /// Cosine drift between the mean unit embedding and the mean reference
    /// embedding.
    MeanEmbedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconcileConfig {
    /// Reconcile every `period_n` turns.
    pub period_n: u64,
    /// Per-unit drift above which [`ReconcileMode::PerUnitCorrect`]
    /// rewrites.
    pub drift_threshold: f64,
    pub mode: ReconcileMode,
    pub metric: StateMetric,
}

impl ReconcileConfig {
    pub fn new(
        period_n: u64,
        drift_threshold: f64,
        mode: ReconcileMode,
        metric: StateMetric,
    ) -> Result<Self> {
        if period_n == 0 {
            return Err(Error::InvalidConfig(
                "reconcile.period_n must be at least 1".into(),
            ));
        }
        if !(0.0..=2.0).contains(&drift_threshold) {
            return Err(Error::InvalidConfig(format!(
                "reconcile.drift_threshold must lie in [0, 2], got {drift_threshold}"
            )));
        }
        Ok(ReconcileConfig {
            period_n,
            drift_threshold,
            mode,
            metric,
        })
    }
}

impl Default for ReconcileConfig {
    fn default() -> Self {
        ReconcileConfig {
            period_n: 20,
            drift_threshold: 0.1,
            mode: ReconcileMode::FullRebuild,
            metric: StateMetric::ConcatText,
        }
    }
}

/// `true` on the turns a reconcile is due: every `period_n` turns, never at
/// turn zero (there is nothing to have drifted yet).
pub fn schedule(step: u64, cfg: &ReconcileConfig) -> bool {
    step > 0 && step % cfg.period_n == 0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconcileReport {
    pub step: u64,
    pub units_checked: u64,
    pub units_corrected: u64,
    /// State-level drift from reference before corrections…
    pub pre_drift: f64,
    /// …and after. Full rebuild drives this to zero by construction.
    pub post_drift: f64,
}

/// A unit's reference content: the contents of its origin entries,
/// ascending seq, single-space joined. For gate-written units this is the
/// content of the entry that defined them; consolidated units concatenate
/// their evidence.
pub fn reference_of(unit: &MemoryUnit, ledger: &Ledger) -> Result<String> {
    let mut seqs = unit.origin_seqs.clone();
    seqs.sort_unstable();
    let mut parts = Vec::with_capacity(seqs.len());
    for seq in seqs {
        let entry = ledger.get(seq).ok_or_else(|| {
            Error::InvalidOrigin(format!(
                "unit {} cites ledger entry {seq}, which does not exist",
                unit.idx
            ))
        })?;
        parts.push(entry.content.clone());
    }
    Ok(parts.join(" "))
}

/// Reference contents of every live unit, idx order, single-space joined —
/// the ledger-derived counterpart of [`MemoryState::canonical_text`].
pub fn state_reference_text(state: &MemoryState, ledger: &Ledger) -> Result<String> {
    let mut parts = Vec::with_capacity(state.len());
    for unit in state.units() {
        parts.push(reference_of(unit, ledger)?);
    }
    Ok(parts.join(" "))
}

fn state_drift(
    state: &MemoryState,
    references: &[(u64, String)],
    metric: StateMetric,
) -> f64 {
    let embedder = state.embedder();
    match metric {
        StateMetric::ConcatText => {
            let actual = state.canonical_text();
            let reference = references
                .iter()
                .map(|(_, r)| r.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            drift_under(embedder, &actual, &reference)
        }
        StateMetric::MeanEmbedding => {
            let actual: Vec<Vec<f64>> = state.units().map(|u| u.embedding.clone()).collect();
            let reference: Vec<Vec<f64>> =
                references.iter().map(|(_, r)| embedder.embed(r)).collect();
            let a = mean_of(&actual, embedder.dim());
            let b = mean_of(&reference, embedder.dim());
            (1.0 - crate::embedding::cosine(&a, &b)).clamp(0.0, 2.0)
        }
    }
}

/// One reconciliation pass over every live unit (core units included —
/// a corrupted core poisons the write gate, so they are repaired first
/// class). Refuses to run against a ledger whose chain fails structural
/// verification.
pub fn reconcile(
    state: &mut MemoryState,
    ledger: &Ledger,
    cfg: &ReconcileConfig,
    step: u64,
) -> Result<ReconcileReport> {
    let chain = ledger.verify_chain(None);
    if !chain.valid {
        return Err(Error::ChainInvalid {
            first_bad_seq: chain.first_bad_seq.unwrap_or(0),
            detail: chain
                .detail
                .unwrap_or_else(|| "chain verification failed".into()),
        });
    }

    let mut references: Vec<(u64, String)> = Vec::with_capacity(state.len());
    for unit in state.units() {
        references.push((unit.idx, reference_of(unit, ledger)?));
    }
    let pre_drift = state_drift(state, &references, cfg.metric);

    let embedder = state.embedder().clone();
    let mut units_corrected = 0u64;
    for (idx, reference) in &references {
        let unit = state.get(*idx).expect("collected from live units");
        let needs_rewrite = match cfg.mode {
            ReconcileMode::FullRebuild => unit.content != *reference,
            ReconcileMode::PerUnitCorrect => {
                drift_under(&embedder, &unit.content, reference) > cfg.drift_threshold
            }
        };
        if needs_rewrite {
            state.overwrite_content(*idx, reference)?;
            units_corrected += 1;
        }
    }
    let post_drift = state_drift(state, &references, cfg.metric);

    Ok(ReconcileReport {
        step,
        units_checked: references.len() as u64,
        units_corrected,
        pre_drift,
        post_drift,
    })
}

/// Appends a report row to a CSV file, writing the header first when the
/// file is new or empty. Floats are written with shortest-roundtrip
/// formatting, so identical reports produce identical bytes.
pub fn append_report_csv(path: &Path, report: &ReconcileReport) -> Result<()> {
    let needs_header = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if needs_header {
        writeln!(file, "step,units_checked,units_corrected,pre_drift,post_drift")?;
    }
    writeln!(
        file,
        "{},{},{},{},{}",
        report.step,
        report.units_checked,
        report.units_corrected,
        report.pre_drift,
        report.post_drift
    )?;
    Ok(())
}
