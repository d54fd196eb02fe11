//! Brute-force re-derivation of constrained retrieval.
//!
//! The oracle recomputes everything the read gate does, from primitives and
//! in a different shape: rank *all* units by similarity, cut to the top k,
//! then walk that slate filtering by an independently written first-match
//! ACL evaluator (with its own recursive glob matcher) and the Weibull
//! freshness formula written out longhand. The gate must agree with the
//! oracle unit-for-unit and order-for-order on hundreds of randomized
//! stores, and the usage-stamp side effects must land on exactly the
//! returned units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssgm_core::read_gate::{prune_stale, retrieve};
use ssgm_core::{
    cosine, AccessPolicy, DecayConfig, Effect, EntryKind, HashEmbedder, Identity, Keyring, Ledger,
    MemoryState, PolicyRule, UnitDraft,
};

// ---- the oracle -----------------------------------------------------------

mod oracle {
    use super::*;

    pub fn glob(pattern: &str, text: &str) -> bool {
        fn walk(p: &[char], s: &[char]) -> bool {
            match p.split_first() {
                None => s.is_empty(),
                Some(('*', rest)) => (0..=s.len()).any(|i| walk(rest, &s[i..])),
                Some(('?', rest)) => !s.is_empty() && walk(rest, &s[1..]),
                Some((c, rest)) => s.first() == Some(c) && walk(rest, &s[1..]),
            }
        }
        let p: Vec<char> = pattern.chars().collect();
        let s: Vec<char> = text.chars().collect();
        walk(&p, &s)
    }

    pub fn acl(policy: &AccessPolicy, identity: &Identity, scope: &str) -> bool {
        for rule in &policy.rules {
            let fires = glob(&rule.scope_pattern, scope)
                && rule
                    .required_attributes
                    .iter()
                    .all(|req| identity.attributes.contains(req));
            if fires {
                return rule.effect == Effect::Allow;
            }
        }
        false
    }

    pub fn weibull(age: u64, decay: &DecayConfig) -> f64 {
        (-((age as f64) / decay.eta).powf(decay.kappa)).exp()
    }

    /// Expected retrieval: idxs in return order, computed from a pre-call
    /// snapshot of the stamps.
    pub fn retrieve(
        state: &MemoryState,
        query: &str,
        identity: &Identity,
        k: usize,
        decay: &DecayConfig,
        policy: &AccessPolicy,
    ) -> Vec<u64> {
        let q = state.embedder().embed(query);
        let mut ranked: Vec<(u64, f64)> = state
            .units()
            .map(|u| (u.idx, cosine(&q, &u.embedding)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        let clock = state.clock();
        ranked
            .into_iter()
            .filter(|(idx, _)| {
                let unit = state.get(*idx).expect("ranked unit");
                let age = clock.saturating_sub(unit.last_used_at);
                acl(policy, identity, &unit.scope)
                    && weibull(age, decay) >= decay.theta_fresh
            })
            .map(|(idx, _)| idx)
            .collect()
    }
}

// ---- randomized generation --------------------------------------------------

const WORDS: &[&str] = &[
    "amber", "basalt", "cedar", "delta", "ember", "fjord", "garnet", "harbor", "iris", "juniper",
    "krill", "lumen", "marble", "nectar", "onyx", "pylon", "quartz", "russet", "sable", "tundra",
];

const SCOPES: &[&str] = &["team-red", "team-blue", "team-rust", "ops", "ops-eu", "public"];

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=8);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_state(rng: &mut ChaCha8Rng, max_units: usize) -> MemoryState {
    let mut state = MemoryState::new(HashEmbedder::new(64).unwrap());
    let n = rng.random_range(1..=max_units);
    for _ in 0..n {
        state
            .insert(
                UnitDraft {
                    content: random_text(rng),
                    slots: vec![],
                    scope: SCOPES[rng.random_range(0..SCOPES.len())].into(),
                    source_id: "gen".into(),
                    origin_seqs: vec![rng.random_range(0..1000)],
                    is_core: rng.random_range(0..10) == 0,
                },
                Some(1000),
            )
            .unwrap();
    }
    // Scatter the stamps so freshness actually filters: clock well ahead of
    // some units, right on top of others.
    let clock = rng.random_range(5..60);
    state.set_clock(clock);
    let idxs: Vec<u64> = state.units().map(|u| u.idx).collect();
    for idx in idxs {
        let stamp = rng.random_range(0..=clock);
        state.set_clock(stamp);
        state.touch(idx).unwrap();
    }
    state.set_clock(clock);
    state
}

fn random_policy(rng: &mut ChaCha8Rng, max_rules: usize) -> AccessPolicy {
    let patterns = ["*", "team-*", "team-r*", "ops*", "ops", "team-????", "public"];
    let n = rng.random_range(0..=max_rules);
    AccessPolicy {
        rules: (0..n)
            .map(|_| {
                let mut required = std::collections::BTreeSet::new();
                for _ in 0..rng.random_range(0..=2) {
                    let attr = ["team", "level", "region"][rng.random_range(0..3)];
                    let value = ["red", "blue", "high", "eu"][rng.random_range(0..4)];
                    required.insert((attr.to_string(), value.to_string()));
                }
                PolicyRule {
                    scope_pattern: patterns[rng.random_range(0..patterns.len())].into(),
                    required_attributes: required,
                    effect: if rng.random_range(0..4) == 0 {
                        Effect::Deny
                    } else {
                        Effect::Allow
                    },
                }
            })
            .collect(),
    }
}

fn random_identity(rng: &mut ChaCha8Rng) -> Identity {
    let mut id = Identity::new("probe");
    for _ in 0..rng.random_range(0..=3) {
        let attr = ["team", "level", "region"][rng.random_range(0..3)];
        let value = ["red", "blue", "high", "eu"][rng.random_range(0..4)];
        id = id.with_attr(attr, value);
    }
    id
}

fn random_decay(rng: &mut ChaCha8Rng) -> DecayConfig {
    DecayConfig::new(
        [2.0, 5.0, 10.0, 40.0][rng.random_range(0..4)],
        [0.5, 1.0, 2.0][rng.random_range(0..3)],
        [0.0, 0.01, 0.2, 0.6][rng.random_range(0..4)],
    )
    .unwrap()
}

// ---- the equivalence runs ---------------------------------------------------

#[test]
fn gate_matches_brute_force_on_randomized_stores() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ead_0a7e);
    for case in 0..300 {
        let mut state = random_state(&mut rng, 50);
        let policy = random_policy(&mut rng, 5);
        let identity = random_identity(&mut rng);
        let decay = random_decay(&mut rng);
        let k = rng.random_range(0..=12);
        let query = random_text(&mut rng);

        let expected = oracle::retrieve(&state, &query, &identity, k, &decay, &policy);
        let result = retrieve(&mut state, &query, &identity, k, &decay, &policy);
        let got: Vec<u64> = result.units.iter().map(|u| u.idx).collect();
        assert_eq!(got, expected, "case {case} diverged from the oracle");
    }
}

#[test]
fn returned_units_are_touched_and_withheld_units_are_not() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70c4);
    for _ in 0..50 {
        let mut state = random_state(&mut rng, 30);
        let policy = random_policy(&mut rng, 4);
        let identity = random_identity(&mut rng);
        let decay = random_decay(&mut rng);
        let query = random_text(&mut rng);

        let before: Vec<(u64, u64)> = state.units().map(|u| (u.idx, u.last_used_at)).collect();
        let clock = state.clock();
        let result = retrieve(&mut state, &query, &identity, 8, &decay, &policy);
        let returned: std::collections::BTreeSet<u64> =
            result.units.iter().map(|u| u.idx).collect();
        for (idx, stamp_before) in before {
            let now = state.get(idx).unwrap().last_used_at;
            if returned.contains(&idx) {
                assert_eq!(now, clock, "returned unit {idx} not touched");
            } else {
                assert_eq!(now, stamp_before, "withheld unit {idx} was touched");
            }
        }
    }
}

#[test]
fn sequential_queries_account_for_earlier_touches() {
    // Retrieval refreshes what it returns, so a unit about to go stale can
    // be kept alive by being read — and the oracle, recomputed from the
    // current stamps before each call, must track that.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e9);
    let mut state = random_state(&mut rng, 25);
    let policy = AccessPolicy::allow_all();
    let identity = Identity::new("probe");
    let decay = DecayConfig::new(6.0, 1.0, 0.15).unwrap();
    for round in 0..30 {
        let query = random_text(&mut rng);
        let expected = oracle::retrieve(&state, &query, &identity, 6, &decay, &policy);
        let got: Vec<u64> = retrieve(&mut state, &query, &identity, 6, &decay, &policy)
            .units
            .iter()
            .map(|u| u.idx)
            .collect();
        assert_eq!(got, expected, "round {round}");
        state.set_clock(state.clock() + rng.random_range(0..4));
    }
}

#[test]
fn prune_removes_exactly_the_stale_noncore_units_and_audits_them() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdead_beef);
    for _ in 0..40 {
        let mut state = random_state(&mut rng, 40);
        let decay = random_decay(&mut rng);
        let clock = state.clock();
        let expected_pruned: Vec<u64> = state
            .units()
            .filter(|u| {
                !u.is_core
                    && oracle::weibull(clock.saturating_sub(u.last_used_at), &decay)
                        < decay.theta_fresh
            })
            .map(|u| u.idx)
            .collect();

        let mut keyring = Keyring::new();
        keyring.register_with_key("system", [7u8; 32]);
        let mut ledger = Ledger::in_memory();
        let pruned = prune_stale(&mut state, &decay, &mut ledger, &keyring, "system").unwrap();

        assert_eq!(pruned, expected_pruned, "pruned set diverged");
        for idx in &pruned {
            assert!(state.get(*idx).is_none(), "pruned unit {idx} still live");
        }
        // One archive entry per pruned unit, in idx order.
        let archived: Vec<u64> = ledger
            .entries()
            .iter()
            .filter_map(|e| match e.kind {
                EntryKind::Archive { idx } => Some(idx),
                _ => None,
            })
            .collect();
        assert_eq!(archived, expected_pruned);
        // Cores never leave, however stale.
        for unit in state.units() {
            if unit.is_core {
                continue;
            }
            let fresh =
                oracle::weibull(clock.saturating_sub(unit.last_used_at), &decay);
            assert!(fresh >= decay.theta_fresh, "stale unit {} survived", unit.idx);
        }
    }
}

#[test]
fn glob_oracle_agrees_with_the_library_matcher() {
    let cases = [
        ("*", ""),
        ("*", "anything"),
        ("team-*", "team-"),
        ("team-*", "team-red"),
        ("team-*", "tea"),
        ("team-????", "team-rust"),
        ("team-????", "team-red"),
        ("*-eu", "ops-eu"),
        ("*-eu", "eu"),
        ("a*b*c", "aXXbYYc"),
        ("a*b*c", "ac"),
        ("a*b*c", "abc"),
        ("???", "abc"),
        ("???", "ab"),
        ("tenant-1*", "tenant-10"),
        ("tenant-1", "tenant-10"),
        ("日*語", "日本語"),
        ("日*語", "日語"),
    ];
    for (pattern, text) in cases {
        assert_eq!(
            ssgm_core::glob_match(pattern, text),
            oracle::glob(pattern, text),
            "diverged on ({pattern}, {text})"
        );
    }
    // And fuzzed agreement over a tight alphabet where collisions abound.
    let mut rng = ChaCha8Rng::seed_from_u64(0x91b0);
    for _ in 0..4000 {
        let alphabet = ['a', 'b', '*', '?'];
        let pattern: String = (0..rng.random_range(0..=6))
            .map(|_| alphabet[rng.random_range(0..4)])
            .collect();
        let text: String = (0..rng.random_range(0..=6))
            .map(|_| ['a', 'b'][rng.random_range(0..2)])
            .collect();
        assert_eq!(
            ssgm_core::glob_match(&pattern, &text),
            oracle::glob(&pattern, &text),
            "diverged on ({pattern}, {text})"
        );
    }
}
