//! The read gate: what a caller is allowed to see, and how memories age.
//!
//! Retrieval is a three-stage pipeline over active memory:
//!
//! 1. **Top-K** — cosine similarity against the query, idx tie-break
//!    (delegated to [`MemoryState::topk`]);
//! 2. **ACL** — each candidate's scope is checked against the caller's
//!    identity under a first-match-wins rule list, default deny;
//! 3. **Freshness** — a Weibull survival weight
//!    `w(Δτ) = exp(−(Δτ/η)^κ)` over the turns since the unit was last
//!    used; candidates below the threshold are filtered.
//!
//! Crucially there is **no backfill**: a filtered candidate's slot is not
//! given to the next-best unit. Filtering happens after ranking, so the
//! result can be shorter than `k` — leaking *that* something was withheld
//! is acceptable; leaking *what* is not.
//!
//! Units that fall below the freshness threshold can be swept out of active
//! memory entirely by [`prune_stale`], which archives their final content
//! to the ledger before removal — forgetting is itself an audited event.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::keyring::Keyring;
use crate::ledger::{EntryKind, Ledger, Triple};
use crate::store::{MemoryState, MemoryUnit};

// ---------------------------------------------------------------------------
// Freshness
// ---------------------------------------------------------------------------

/// Parameters of the Weibull freshness curve and the visibility threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayConfig {
    /// Characteristic lifetime η (turns); at Δτ = η the weight is 1/e.
    pub eta: f64,
    /// Shape κ: κ = 1 is exponential decay, κ > 1 ages slowly then
    /// sharply, κ < 1 front-loads the decay.
    pub kappa: f64,
    /// Minimum weight a unit needs to be readable (and to survive pruning).
    pub theta_fresh: f64,
}

impl DecayConfig {
    pub fn new(eta: f64, kappa: f64, theta_fresh: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "decay.eta must be a positive finite number, got {eta}"
            )));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "decay.kappa must be a positive finite number, got {kappa}"
            )));
        }
        if !(0.0..=1.0).contains(&theta_fresh) {
            return Err(Error::InvalidConfig(format!(
                "decay.theta_fresh must lie in [0, 1], got {theta_fresh}"
            )));
        }
        Ok(DecayConfig {
            eta,
            kappa,
            theta_fresh,
        })
    }
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            eta: 10.0,
            kappa: 1.0,
            theta_fresh: 0.01,
        }
    }
}

/// Weibull survival weight `exp(−(Δτ/η)^κ)` for an age of `delta_tau`
/// turns. 1 at Δτ = 0, strictly decreasing, 1/e at Δτ = η.
pub fn freshness(delta_tau: u64, decay: &DecayConfig) -> f64 {
    let x = delta_tau as f64 / decay.eta;
    (-x.powf(decay.kappa)).exp()
}

// ---------------------------------------------------------------------------
// Access control
// ---------------------------------------------------------------------------

/// Who is asking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identity {
    pub principal_id: String,
    /// `(attribute, value)` claims, e.g. `("tenant", "acme")`.
    pub attributes: BTreeSet<(String, String)>,
}

impl Identity {
    pub fn new(principal_id: impl Into<String>) -> Self {
        Identity {
            principal_id: principal_id.into(),
            attributes: BTreeSet::new(),
        }
    }

    pub fn with_attr(mut self, attribute: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert((attribute.into(), value.into()));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Allow,
    Deny,
}

/// One policy rule: fires when the unit's scope matches `scope_pattern`
/// (glob) *and* the caller holds every attribute in `required_attributes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRule {
    pub scope_pattern: String,
    pub required_attributes: BTreeSet<(String, String)>,
    pub effect: Effect,
}

/// An ordered rule list; the first rule that fires decides. No rule firing
/// means deny — silence is not consent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessPolicy {
    pub rules: Vec<PolicyRule>,
}

impl AccessPolicy {
    pub fn allow_all() -> Self {
        AccessPolicy {
            rules: vec![PolicyRule {
                scope_pattern: "*".into(),
                required_attributes: BTreeSet::new(),
                effect: Effect::Allow,
            }],
        }
    }

    /// `true` iff `identity` may read units in `scope`.
    pub fn permits(&self, scope: &str, identity: &Identity) -> bool {
        for rule in &self.rules {
            if glob_match(&rule.scope_pattern, scope)
                && rule.required_attributes.is_subset(&identity.attributes)
            {
                return rule.effect == Effect::Allow;
            }
        }
        false
    }

    /// Loads a policy from a TSV file in the format [`AccessPolicy::parse`]
    /// reads. A missing file is the empty (deny-everything) policy.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(AccessPolicy::default());
        }
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(why) => {
                Error::InvalidConfig(format!("{}:{}", path.display(), why))
            }
            other => other,
        })
    }

    /// Parses the TSV policy text, one rule per line:
    ///
    /// ```text
    /// scope_glob<TAB>attr=value,attr=value<TAB>allow|deny
    /// ```
    ///
    /// The attribute list may be empty (a bare scope rule). `#` comments
    /// and blank lines are ignored; anything else is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| Error::InvalidConfig(format!("{}: {}", lineno + 1, why));
            let mut fields = line.split('\t');
            let (Some(pattern), Some(attrs), Some(effect), None) = (
                fields.next(),
                fields.next(),
                fields.next(),
                fields.next(),
            ) else {
                return Err(bad("expected scope_glob<TAB>attrs<TAB>allow|deny"));
            };
            if pattern.is_empty() {
                return Err(bad("empty scope pattern"));
            }
            let mut required_attributes = BTreeSet::new();
            if !attrs.is_empty() {
                for pair in attrs.split(',') {
                    let Some((a, v)) = pair.split_once('=') else {
                        return Err(bad(&format!("attribute `{pair}` is not attr=value")));
                    };
                    if a.is_empty() {
                        return Err(bad("empty attribute name"));
                    }
                    required_attributes.insert((a.to_string(), v.to_string()));
                }
            }
            let effect = match effect {
                "allow" => Effect::Allow,
                "deny" => Effect::Deny,
                other => return Err(bad(&format!("effect must be allow or deny, got `{other}`"))),
            };
            rules.push(PolicyRule {
                scope_pattern: pattern.to_string(),
                required_attributes,
                effect,
            });
        }
        Ok(AccessPolicy { rules })
    }

    /// Writes the policy in the format [`AccessPolicy::load`] reads.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("# scope_glob<TAB>attr=value,...<TAB>allow|deny\n");
        for rule in &self.rules {
            let attrs: Vec<String> = rule
                .required_attributes
                .iter()
                .map(|(a, v)| format!("{a}={v}"))
                .collect();
            let effect = match rule.effect {
                Effect::Allow => "allow",
                Effect::Deny => "deny",
            };
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                rule.scope_pattern,
                attrs.join(","),
                effect
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Glob match with `*` (any run, including empty) and `?` (exactly one
/// character). Iterative with backtracking over chars, so it is linear-ish
/// and cannot blow the stack on adversarial patterns.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut star: Option<(usize, usize)> = None; // (pattern pos after '*', text pos it matched to)
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi + 1, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            // Let the last '*' swallow one more character and retry.
            pi = sp;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}

/// `true` iff `identity` may read `unit` under `policy`.
pub fn acl_check(unit: &MemoryUnit, identity: &Identity, policy: &AccessPolicy) -> bool {
    policy.permits(&unit.scope, identity)
}

// ---------------------------------------------------------------------------
// Governed retrieval
// ---------------------------------------------------------------------------

/// A unit as returned to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedUnit {
    pub idx: u64,
    pub similarity: f64,
    pub content: String,
    pub slots: Vec<Triple>,
    pub scope: String,
}

/// Per-candidate trace of what each pipeline stage decided.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateAudit {
    pub idx: u64,
    pub similarity: f64,
    pub acl_pass: bool,
    pub freshness: f64,
    pub fresh_pass: bool,
    pub returned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// Survivors of the full pipeline, in Top-K rank order. May hold fewer
    /// than `k` units — filtered slots are never backfilled.
    pub units: Vec<RetrievedUnit>,
    pub audit: Vec<CandidateAudit>,
}

/// Runs the full read pipeline at the state's current clock and marks the
/// returned units as used this turn.
pub fn retrieve(
    state: &mut MemoryState,
    query: &str,
    identity: &Identity,
    k: usize,
    decay: &DecayConfig,
    policy: &AccessPolicy,
) -> RetrievalResult {
    let now = state.clock();
    let mut units = Vec::new();
    let mut audit = Vec::new();
    let mut returned_idxs = Vec::new();
    for (idx, similarity) in state.topk(query, k) {
        let unit = state.get(idx).expect("topk yields live idxs");
        let acl_pass = acl_check(unit, identity, policy);
        let age = now.saturating_sub(unit.last_used_at);
        let w = freshness(age, decay);
        let fresh_pass = w >= decay.theta_fresh;
        let returned = acl_pass && fresh_pass;
        audit.push(CandidateAudit {
            idx,
            similarity,
            acl_pass,
            freshness: w,
            fresh_pass,
            returned,
        });
        if returned {
            units.push(RetrievedUnit {
                idx,
                similarity,
                content: unit.content.clone(),
                slots: unit.slots.clone(),
                scope: unit.scope.clone(),
            });
            returned_idxs.push(idx);
        }
    }
    for idx in returned_idxs {
        state.touch(idx).expect("unit present");
    }
    RetrievalResult { units, audit }
}

// ---------------------------------------------------------------------------
// Pruning
// ---------------------------------------------------------------------------

/// Sweeps non-core units whose freshness has fallen below the threshold out
/// of active memory, ascending idx order. Each removal is recorded first as
/// an archive entry (final content, slots, and scope preserved, written by
/// `system_source`) — if the ledger append fails the unit stays. Returns
/// the archived idxs.
pub fn prune_stale(
    state: &mut MemoryState,
    decay: &DecayConfig,
    ledger: &mut Ledger,
    keyring: &Keyring,
    system_source: &str,
) -> Result<Vec<u64>> {
    let now = state.clock();
    let stale: Vec<u64> = state
        .units()
        .filter(|u| {
            !u.is_core && freshness(now.saturating_sub(u.last_used_at), decay) < decay.theta_fresh
        })
        .map(|u| u.idx)
        .collect();
    let mut archived = Vec::new();
    for idx in stale {
        let unit = state.get(idx).expect("collected from live units");
        ledger.append_entry(
            keyring,
            EntryKind::Archive { idx },
            &unit.content.clone(),
            unit.slots.clone(),
            system_source,
            &unit.scope.clone(),
            now,
        )?;
        state.delete(idx);
        archived.push(idx);
    }
    Ok(archived)
}
