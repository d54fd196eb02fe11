//! Independent re-derivation of the embedding pipeline.
//!
//! The embedder is a measurement instrument, so this file re-implements the
//! whole documented construction — seeded FNV-1a/64 over tagged unigram and
//! bigram features, bucket = h mod dim, sign = high bit, L2 normalization in
//! index order — in a deliberately different code shape, and checks the
//! library against it bit-for-bit. A handful of values are additionally
//! frozen as literals produced by the oracle, so a simultaneous bug in both
//! implementations cannot slip through unnoticed: the literals pin today's
//! behavior forever.
//!
//! Regenerate the frozen literals (after an *intentional* format break) with:
//! `cargo test -p ssgm-core --test oracle_embedding print_frozen -- --ignored --nocapture`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssgm_core::{cosine, drift, HashEmbedder};

// ---- the oracle -----------------------------------------------------------

mod oracle {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    const SEED: u64 = 0x5347_4d76_3100_9d2f;

    fn fnv_fold(mut h: u64, bytes: &[u8]) -> u64 {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(PRIME);
        }
        h
    }

    /// Hash one feature: the domain seed's little-endian bytes, then the
    /// feature bytes (tag byte first).
    pub fn feature_hash(feature: &[u8]) -> u64 {
        fnv_fold(fnv_fold(OFFSET, &SEED.to_le_bytes()), feature)
    }

    pub fn unigram_feature(token: &str) -> Vec<u8> {
        let mut f = vec![0x01u8];
        f.extend_from_slice(token.as_bytes());
        f
    }

    pub fn bigram_feature(first: &str, second: &str) -> Vec<u8> {
        let mut f = vec![0x02u8];
        f.extend_from_slice(first.as_bytes());
        f.push(0x1f);
        f.extend_from_slice(second.as_bytes());
        f
    }

    pub fn embed(text: &str, dim: usize) -> Vec<f64> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let mut features: Vec<Vec<u8>> = Vec::new();
        for t in &tokens {
            features.push(unigram_feature(t));
        }
        for i in 1..tokens.len() {
            features.push(bigram_feature(tokens[i - 1], tokens[i]));
        }
        let mut v = vec![0.0f64; dim];
        for f in &features {
            let h = feature_hash(f);
            let bucket = (h % dim as u64) as usize;
            v[bucket] += if h & (1 << 63) != 0 { -1.0 } else { 1.0 };
        }
        let norm = v.iter().fold(0.0f64, |acc, x| acc + x * x).sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

// ---- frozen literals ------------------------------------------------------

const FROZEN_TEXT: &str = "the cat sat on the mat";
const FROZEN_DIM: usize = 8;

/// `oracle::embed(FROZEN_TEXT, 8)`, bit patterns, produced by `print_frozen`.
const FROZEN_EMBEDDING_BITS: [u64; 8] = [
    0x0000_0000_0000_0000,
    0x3fd8_3091_e6a7_f7e6,
    0xbfd8_3091_e6a7_f7e6,
    0xbfe8_3091_e6a7_f7e6,
    0x0000_0000_0000_0000,
    0x0000_0000_0000_0000,
    0x0000_0000_0000_0000,
    0x3fd8_3091_e6a7_f7e6,
];

/// `feature_hash` of the unigram "alpha" and of the bigram ("alpha","beta").
const FROZEN_UNIGRAM_ALPHA: u64 = 0x8c5d_a5c3_ac63_fa24;
const FROZEN_BIGRAM_ALPHA_BETA: u64 = 0x4fd8_f656_2d47_e3c2;

/// `cosine(oracle::embed("pack my box with five dozen", 64),
///         oracle::embed("five dozen liquor jugs", 64))` bit pattern.
const FROZEN_COSINE_BITS: u64 = 0x3fdd_2c85_34ed_6d88;

#[test]
#[ignore = "regenerates the frozen literals; run with --nocapture and paste"]
fn print_frozen() {
    let v = oracle::embed(FROZEN_TEXT, FROZEN_DIM);
    println!("FROZEN_EMBEDDING_BITS:");
    for b in bits(&v) {
        println!("    0x{b:016x},");
    }
    println!(
        "FROZEN_UNIGRAM_ALPHA: 0x{:016x}",
        oracle::feature_hash(&oracle::unigram_feature("alpha"))
    );
    println!(
        "FROZEN_BIGRAM_ALPHA_BETA: 0x{:016x}",
        oracle::feature_hash(&oracle::bigram_feature("alpha", "beta"))
    );
    let a = oracle::embed("pack my box with five dozen", 64);
    let b = oracle::embed("five dozen liquor jugs", 64);
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for i in 0..64 {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    let cos = dot / (na.sqrt() * nb.sqrt());
    println!("FROZEN_COSINE_BITS: 0x{:016x}", cos.to_bits());
}

// ---- oracle vs frozen vs library ------------------------------------------

#[test]
fn frozen_feature_hashes_hold() {
    assert_eq!(
        oracle::feature_hash(&oracle::unigram_feature("alpha")),
        FROZEN_UNIGRAM_ALPHA
    );
    assert_eq!(
        oracle::feature_hash(&oracle::bigram_feature("alpha", "beta")),
        FROZEN_BIGRAM_ALPHA_BETA
    );
}

#[test]
fn frozen_embedding_holds_for_oracle_and_library() {
    let from_oracle = oracle::embed(FROZEN_TEXT, FROZEN_DIM);
    assert_eq!(bits(&from_oracle), FROZEN_EMBEDDING_BITS.to_vec());

    let embedder = HashEmbedder::new(FROZEN_DIM).unwrap();
    let from_library = embedder.embed(FROZEN_TEXT);
    assert_eq!(bits(&from_library), FROZEN_EMBEDDING_BITS.to_vec());
}

#[test]
fn frozen_cosine_holds() {
    let embedder = HashEmbedder::new(64).unwrap();
    let got = cosine(
        &embedder.embed("pack my box with five dozen"),
        &embedder.embed("five dozen liquor jugs"),
    );
    assert_eq!(got.to_bits(), FROZEN_COSINE_BITS);
    // Shared tokens but different orders — similar, far from identical.
    assert!(got > 0.0 && got < 0.9, "cosine {got} out of plausible band");
}

// ---- randomized equivalence ------------------------------------------------

fn random_token(rng: &mut ChaCha8Rng) -> String {
    // Mostly ASCII words, some unicode, some punctuation-bearing tokens —
    // the tokenizer only splits on whitespace, so all of these are single
    // tokens.
    let alphabets = ["abcdefghijklmnopqrstuvwxyz", "äöüßéèñ", "日本語漢字", "-_'!?.,:"];
    let which = rng.random_range(0..100);
    let alphabet: Vec<char> = if which < 80 {
        alphabets[0].chars().collect()
    } else if which < 90 {
        alphabets[1].chars().collect()
    } else if which < 95 {
        alphabets[2].chars().collect()
    } else {
        alphabets[3].chars().collect()
    };
    let len = rng.random_range(1..=10);
    (0..len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let words = rng.random_range(0..=14);
    (0..words)
        .map(|_| random_token(rng))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn oracle_matches_library_bit_for_bit_on_random_texts() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0e0b_ed01);
    for dim in [8usize, 64, 256, 333] {
        let embedder = HashEmbedder::new(dim).unwrap();
        for _ in 0..250 {
            let text = random_text(&mut rng);
            let expect = oracle::embed(&text, dim);
            let got = embedder.embed(&text);
            assert_eq!(
                bits(&got),
                bits(&expect),
                "dim {dim} diverged on {text:?}"
            );
        }
    }
}

#[test]
fn a_token_containing_the_bigram_separator_is_not_a_bigram() {
    // "a\u{1f}b" as one token must hash in the unigram domain, never
    // colliding with the bigram ("a","b") — the leading tag byte separates
    // the domains.
    let tricky = oracle::feature_hash(&oracle::unigram_feature("a\u{1f}b"));
    let bigram = oracle::feature_hash(&oracle::bigram_feature("a", "b"));
    assert_ne!(tricky, bigram);

    let embedder = HashEmbedder::new(64).unwrap();
    let one_token = embedder.embed("a\u{1f}b");
    let expect = oracle::embed("a\u{1f}b", 64);
    assert_eq!(bits(&one_token), bits(&expect));
}

#[test]
fn zero_vector_sentinels_agree() {
    let embedder = HashEmbedder::new(16).unwrap();
    for text in ["", "   ", "\t\n", " \u{3000} "] {
        assert!(embedder.embed(text).iter().all(|x| *x == 0.0));
        assert!(oracle::embed(text, 16).iter().all(|x| *x == 0.0));
    }
    let zero = embedder.embed("");
    let something = embedder.embed("something");
    assert_eq!(cosine(&zero, &something), 0.0);
    assert_eq!(cosine(&zero, &zero), 0.0);
    // Drift against nothing is total by the same convention.
    assert_eq!(drift("", "something"), 1.0);
}
