//! Leakage experiment: can a tenant retrieve another tenant's secrets?
//!
//! Setup: several tenants each store secrets in their own scope, and the
//! policy grants each tenant exactly its own scope. The attacker then runs
//! thousands of retrievals using *verbatim copies of other tenants'
//! secrets* as queries — the strongest similarity attack there is, since
//! the target unit scores 1.0. A query "leaks" if any returned unit
//! belongs to a scope other than the attacker's own.
//!
//! With the read gate on, the leak count must be exactly zero — access
//! control is a correctness property, not a statistical one. The bypass
//! arm (raw Top-K with no gate) shows what the same store gives up without
//! governance: nearly every query leaks.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::HashEmbedder;
use crate::error::Result;
use crate::read_gate::{self, AccessPolicy, DecayConfig, Effect, Identity, PolicyRule};
use crate::sim::VOCAB;
use crate::store::{MemoryState, UnitDraft};

const CORPUS_SALT: u64 = 0x6c65_616b_3030_3031;
const QUERY_SALT: u64 = 0x6c65_616b_7175_6572;
const TOKENS_PER_SECRET: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageConfig {
    pub tenants: usize,
    pub secrets_per_tenant: usize,
    pub queries: usize,
    /// Candidate pool per retrieval.
    pub k: usize,
    pub seed: u64,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        LeakageConfig {
            tenants: 4,
            secrets_per_tenant: 25,
            queries: 10_000,
            k: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageOutcome {
    pub tenants: usize,
    pub policy_on: bool,
    pub queries: u64,
    pub leaks: u64,
    pub leakage_rate: f64,
}

fn tenant_scope(i: usize) -> String {
    format!("tenant-{i}")
}

/// Builds the multi-tenant store. Every secret is vocabulary words plus a
/// unique nonce token, so secrets are distinguishable and exact-text
/// queries rank their target first.
fn build_state(cfg: &LeakageConfig) -> MemoryState {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ CORPUS_SALT);
    let mut state = MemoryState::new(HashEmbedder::default());
    for tenant in 0..cfg.tenants {
        for j in 0..cfg.secrets_per_tenant {
            let mut words: Vec<String> = (0..TOKENS_PER_SECRET)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())].to_string())
                .collect();
            words.push(format!("nonce-{tenant}-{j}"));
            state
                .insert(
                    UnitDraft {
                        content: words.join(" "),
                        slots: vec![],
                        scope: tenant_scope(tenant),
                        source_id: "seeder".into(),
                        origin_seqs: vec![0],
                        is_core: false,
                    },
                    Some(0),
                )
                .expect("anchored origin");
        }
    }
    state
}

/// Each tenant may read exactly its own scope. Exact scope names — glob
/// wildcards on tenant prefixes are how `tenant-1*` accidentally grants
/// `tenant-10`.
fn tenant_policy(tenants: usize) -> AccessPolicy {
    AccessPolicy {
        rules: (0..tenants)
            .map(|i| PolicyRule {
                scope_pattern: tenant_scope(i),
                required_attributes: [("tenant".to_string(), tenant_scope(i))].into(),
                effect: Effect::Allow,
            })
            .collect(),
    }
}

/// Runs one arm. `policy_on` routes every query through the read gate;
/// otherwise queries hit raw Top-K with no access control at all.
pub fn run_leakage(cfg: &LeakageConfig, policy_on: bool) -> LeakageOutcome {
    assert!(cfg.tenants >= 2, "leakage needs someone to steal from");
    let mut state = build_state(cfg);
    let policy = tenant_policy(cfg.tenants);
    // Freshness is not under test here: threshold zero keeps every unit
    // readable however stale it gets.
    let decay = DecayConfig {
        theta_fresh: 0.0,
        ..DecayConfig::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ QUERY_SALT);
    let mut leaks = 0u64;
    for _ in 0..cfg.queries {
        let attacker = rng.random_range(0..cfg.tenants);
        let victim_offset = rng.random_range(1..cfg.tenants);
        let victim = (attacker + victim_offset) % cfg.tenants;
        let secret_j = rng.random_range(0..cfg.secrets_per_tenant);
        let victim_idx = (victim * cfg.secrets_per_tenant + secret_j) as u64;
        let query = state.get(victim_idx).expect("seeded unit").content.clone();
        let own_scope = tenant_scope(attacker);

        let leaked = if policy_on {
            let identity =
                Identity::new(format!("tenant-{attacker}-agent")).with_attr("tenant", &own_scope);
            let result = read_gate::retrieve(&mut state, &query, &identity, cfg.k, &decay, &policy);
            result.units.iter().any(|u| u.scope != own_scope)
        } else {
            state
                .topk(&query, cfg.k)
                .iter()
                .any(|(idx, _)| state.get(*idx).expect("live unit").scope != own_scope)
        };
        if leaked {
            leaks += 1;
        }
    }
    LeakageOutcome {
        tenants: cfg.tenants,
        policy_on,
        queries: cfg.queries as u64,
        leaks,
        leakage_rate: leaks as f64 / cfg.queries as f64,
    }
}

/// Runs the gated arm and the bypass arm.
pub fn run_leakage_both(cfg: &LeakageConfig) -> Vec<LeakageOutcome> {
    vec![run_leakage(cfg, true), run_leakage(cfg, false)]
}

/// Writes `tenants,policy_on,leakage_rate` rows.
pub fn write_csv(outcomes: &[LeakageOutcome], path: &Path) -> Result<()> {
    let mut out = String::from("tenants,policy_on,leakage_rate\n");
    for o in outcomes {
        out.push_str(&format!("{},{},{}\n", o.tenants, o.policy_on, o.leakage_rate));
    }
    std::fs::write(path, out)?;
    Ok(())
}
