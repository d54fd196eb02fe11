//! Drift experiment: how far does active memory wander from ground truth,
//! with and without periodic reconciliation?
//!
//! Setup: a corpus of random facts is recorded to a ledger and loaded into
//! active memory. Every step, every unit is rewritten by a lossy
//! summarizer that replaces each token with probability ε — the stand-in
//! for compaction bugs, model rewrites, and bit rot. The *naive* run lets
//! the corruption compound; the *governed* run reconciles against the
//! ledger every `window` steps. Both runs consume the identical corruption
//! stream (checked via [`StreamChecksum`]), so the only difference between
//! the curves is governance.
//!
//! The measured quantity is cosine drift between the concatenated state
//! text and the concatenated ground-truth text at every step. Naive drift
//! compounds toward saturation; governed drift is bounded by what a single
//! window can accumulate and resets to zero at every reconcile.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{drift_under, HashEmbedder};
use crate::error::Result;
use crate::keyring::Keyring;
use crate::ledger::{EntryKind, Ledger};
use crate::reconciler::{
    reconcile, schedule, ReconcileConfig, ReconcileMode, StateMetric,
};
use crate::sim::{derived_key, lossy_summarize, random_sentences, StreamChecksum};
use crate::store::{MemoryState, UnitDraft};

const CORPUS_SALT: u64 = 0x636f_7270_7573_3031;
const PERTURB_SALT: u64 = 0x7065_7274_7572_6231;
const TOKENS_PER_FACT: usize = 10;

/// Which arm of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Naive,
    Governed,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Naive => "naive",
            Arm::Governed => "governed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftConfig {
    /// Perturbation steps per run (drift is also recorded at step 0).
    pub total_steps: u64,
    /// Reconcile period for the governed arm.
    pub window: u64,
    /// Per-token replacement probability per step.
    pub epsilon: f64,
    /// One independent run per seed, both arms.
    pub seeds: Vec<u64>,
    /// Facts in the corpus.
    pub corpus_size: usize,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            total_steps: 200,
            window: 20,
            epsilon: 0.02,
            seeds: (0..10).map(|i| 42 + i).collect(),
            corpus_size: 24,
        }
    }
}

/// One arm of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftRun {
    pub seed: u64,
    pub arm: Arm,
    /// `deltas[t]` is the state drift after step `t`; index 0 is the clean
    /// starting point.
    pub deltas: Vec<f64>,
    /// `(step, pre_drift, post_drift)` for every reconcile pass (governed
    /// arm only).
    pub reconciles: Vec<(u64, f64, f64)>,
    /// Digest of every random draw the corruption stream made.
    pub stream_checksum: [u8; 32],
}

impl DriftRun {
    pub fn final_delta(&self) -> f64 {
        *self.deltas.last().expect("at least step 0")
    }

    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs one arm for one seed.
pub fn run_drift(seed: u64, arm: Arm, cfg: &DriftConfig) -> DriftRun {
    // Corpus and ledger, identical for both arms of a seed.
    let mut corpus_rng = ChaCha8Rng::seed_from_u64(seed ^ CORPUS_SALT);
    let facts = random_sentences(&mut corpus_rng, cfg.corpus_size, TOKENS_PER_FACT);

    let mut keyring = Keyring::new();
    keyring.register_with_key("recorder", derived_key("recorder", seed));
    let mut ledger = Ledger::in_memory();
    let mut state = MemoryState::new(HashEmbedder::default());
    for fact in &facts {
        let seq = ledger
            .append_entry(
                &keyring,
                EntryKind::Add { core: false },
                fact,
                vec![],
                "recorder",
                "sim",
                0,
            )
            .expect("recorder key registered");
        state
            .insert(
                UnitDraft {
                    content: fact.clone(),
                    slots: vec![],
                    scope: "sim".into(),
                    source_id: "recorder".into(),
                    origin_seqs: vec![seq],
                    is_core: false,
                },
                ledger.last_seq(),
            )
            .expect("origins just appended");
    }

    let embedder = state.embedder().clone();
    let ground_truth = state.canonical_text();
    let reconcile_cfg = ReconcileConfig {
        period_n: cfg.window,
        drift_threshold: 0.0,
        mode: ReconcileMode::FullRebuild,
        metric: StateMetric::ConcatText,
    };

    let mut deltas = Vec::with_capacity(cfg.total_steps as usize + 1);
    let delta_0 = drift_under(&embedder, &state.canonical_text(), &ground_truth);
    assert_eq!(delta_0, 0.0, "state must start on ground truth");
    deltas.push(delta_0);

    // The corruption stream: shared seed, so the naive and governed arms
    // draw identical coins and picks.
    let mut perturb_rng = ChaCha8Rng::seed_from_u64(seed ^ PERTURB_SALT);
    let mut checksum = StreamChecksum::new();
    let mut reconciles = Vec::new();

    for step in 1..=cfg.total_steps {
        for idx in 0..cfg.corpus_size as u64 {
            let current = state.get(idx).expect("corpus unit").content.clone();
            let rewritten = lossy_summarize(&current, cfg.epsilon, &mut perturb_rng, &mut checksum);
            state
                .overwrite_content(idx, &rewritten)
                .expect("corpus unit");
        }
        if arm == Arm::Governed && schedule(step, &reconcile_cfg) {
            let report = reconcile(&mut state, &ledger, &reconcile_cfg, step)
                .expect("in-memory ledger verifies");
            reconciles.push((step, report.pre_drift, report.post_drift));
        }
        deltas.push(drift_under(&embedder, &state.canonical_text(), &ground_truth));
    }

    DriftRun {
        seed,
        arm,
        deltas,
        reconciles,
        stream_checksum: checksum.finish(),
    }
}

/// Runs both arms for every seed (naive arm first, then governed, seeds in
/// order) and verifies that each seed's two arms consumed the identical
/// corruption stream.
pub fn run_drift_all(cfg: &DriftConfig) -> Vec<DriftRun> {
    let mut runs = Vec::with_capacity(cfg.seeds.len() * 2);
    for arm in [Arm::Naive, Arm::Governed] {
        for &seed in &cfg.seeds {
            runs.push(run_drift(seed, arm, cfg));
        }
    }
    let half = cfg.seeds.len();
    for i in 0..half {
        assert_eq!(
            runs[i].stream_checksum,
            runs[half + i].stream_checksum,
            "seed {}: arms diverged from the shared corruption stream",
            runs[i].seed
        );
    }
    runs
}

/// Writes `step,seed,mode,delta` rows — runs in their given order, steps
/// ascending within a run. Floats use shortest-roundtrip formatting, so a
/// rerun with the same config produces byte-identical output.
pub fn write_csv(runs: &[DriftRun], path: &Path) -> Result<()> {
    let mut out = String::from("step,seed,mode,delta\n");
    for run in runs {
        for (step, delta) in run.deltas.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", step, run.seed, run.arm.name(), delta));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
