//! Simulations: controlled experiments over the governed store.
//!
//! Three experiments, all fully deterministic given their seeds:
//!
//! * [`drift`] — does periodic reconciliation bound memory corruption?
//! * [`leakage`] — does the read gate stop cross-tenant retrieval?
//! * [`latency`] — what do the gate modes cost at acknowledgement time,
//!   and do the governed modes end in the same state?
//!
//! Determinism matters more here than it first looks: the drift experiment
//! compares a governed run against an ungoverned run *under the identical
//! corruption stream*, which only holds if both runs draw the same random
//! numbers in the same order. [`lossy_summarize`] preserves token counts
//! (replacement, never insertion or deletion), so the number of draws per
//! rewrite depends only on the text shape both runs share — and every run
//! folds its draws into a [`StreamChecksum`] so the pairing is checked, not
//! assumed.

use rand::Rng;
use sha2::{Digest as _, Sha256};

pub mod drift;
pub mod latency;
pub mod leakage;

/// Replacement vocabulary for lossy rewrites: common English words, so
/// corrupted text stays plausible rather than turning into noise.
pub const VOCAB: &[&str] = &[
    "time", "year", "people", "way", "day", "man", "thing", "woman", "life", "child",
    "world", "school", "state", "family", "student", "group", "country", "problem", "hand",
    "part", "place", "case", "week", "company", "system", "program", "question", "work",
    "government", "number", "night", "point", "home", "water", "room", "mother", "area",
    "money", "story", "fact", "month", "lot", "right", "study", "book", "eye", "job",
    "word", "business", "issue", "side", "kind", "head", "house", "service", "friend",
    "father", "power", "hour", "game", "line", "end", "member", "law", "car", "city",
    "community", "name", "president", "team", "minute", "idea", "body", "information",
    "back", "parent", "face", "others", "level", "office", "door", "health", "person",
    "art", "war", "history", "party", "result", "change", "morning", "reason", "research",
    "girl", "guy", "moment", "air", "teacher", "force", "education", "foot", "boy", "age",
    "policy", "process", "music", "market", "sense", "nation", "plan", "college", "interest",
    "death", "experience", "effect", "use", "class", "control", "care", "field", "development",
    "role", "effort", "rate", "heart", "drug", "show", "leader", "light", "voice", "wife",
    "price", "police", "mind", "society", "period", "subject", "film", "board", "oil",
    "statement", "phone", "project", "news", "court", "product", "action", "model", "season",
    "paper", "space", "ground", "form", "event", "official", "matter", "center", "couple",
    "site", "activity", "table", "need", "court", "value", "building", "report", "account",
    "road", "star", "order", "practice", "blood", "manager", "letter", "condition", "camera",
    "choice", "summer", "agency", "worker", "north", "love", "risk", "security", "tree",
    "design", "attention", "trade", "range", "concern", "series", "language", "bank",
    "source", "truth", "bridge", "garden", "signal", "stone", "window", "ocean", "forest",
    "engine", "circle", "silver", "shadow", "castle", "cotton", "meadow", "harbor", "lantern",
    "copper", "valley", "thunder", "whisper", "granite", "willow", "ember", "compass",
];

/// SHA-256 over every random draw a simulation makes: coin values as raw
/// IEEE bits, replacement picks as indices. Two runs that claim to share a
/// corruption stream must produce equal digests.
#[derive(Debug, Clone)]
pub struct StreamChecksum {
    hasher: Sha256,
    draws: u64,
}

impl Default for StreamChecksum {
    fn default() -> Self {
        StreamChecksum::new()
    }
}

impl StreamChecksum {
    pub fn new() -> Self {
        StreamChecksum {
            hasher: Sha256::new(),
            draws: 0,
        }
    }

    pub fn note_coin(&mut self, coin: f64) {
        self.hasher.update(coin.to_le_bytes());
        self.draws += 1;
    }

    pub fn note_pick(&mut self, index: usize) {
        self.hasher.update((index as u64).to_le_bytes());
        self.draws += 1;
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn finish(self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out.copy_from_slice(&self.hasher.finalize());
        out
    }
}

/// Rewrites `text` token by token: with probability `epsilon` a token is
/// replaced by a uniformly drawn vocabulary word, otherwise kept. Token
/// count is preserved, so the number of RNG draws depends only on the token
/// count — the property that keeps paired runs on the same stream. Every
/// draw is folded into `checksum`.
pub fn lossy_summarize<R: Rng>(
    text: &str,
    epsilon: f64,
    rng: &mut R,
    checksum: &mut StreamChecksum,
) -> String {
    let mut out: Vec<&str> = Vec::new();
    for token in text.split_whitespace() {
        let coin: f64 = rng.random();
        checksum.note_coin(coin);
        if coin < epsilon {
            let pick = rng.random_range(0..VOCAB.len());
            checksum.note_pick(pick);
            out.push(VOCAB[pick]);
        } else {
            out.push(token);
        }
    }
    out.join(" ")
}

/// A deterministic 32-byte key for simulation sources, so simulated ledgers
/// are reproducible end to end (provenance tags included).
pub fn derived_key(label: &str, seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(seed.to_le_bytes());
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

/// `count` random sentences of `tokens` vocabulary words each.
pub fn random_sentences<R: Rng>(rng: &mut R, count: usize, tokens: usize) -> Vec<String> {
    (0..count)
        .map(|_| {
            let words: Vec<&str> = (0..tokens)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect();
            words.join(" ")
        })
        .collect()
}
