//! C ABI over the governed memory engine.
//!
//! Conventions, in full:
//!
//! - Every fallible call returns an [`SsgmStatus`]; `SSGM_STATUS_OK` is `0`.
//!   After any non-OK status, [`ssgm_last_error_message`] returns a
//!   human-readable description (thread-local, valid until the next failing
//!   call on the same thread — do not free it).
//! - The engine is an opaque handle: create with [`ssgm_engine_open`],
//!   destroy with [`ssgm_engine_close`]. A handle is not internally
//!   synchronized; callers either confine it to one thread or serialize
//!   access themselves.
//! - Strings passed in are NUL-terminated UTF-8. Strings passed out are
//!   allocated here and must be released with [`ssgm_string_free`] — never
//!   with `free(3)`, the allocators may differ.
//! - No call unwinds across the boundary: panics are caught and reported as
//!   `SSGM_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ssgm_core::{
    drift, freshness, AccessPolicy, Config, DecayConfig, Engine, Error, Request, Triple,
};

/// Bumped whenever the exported surface changes incompatibly.
pub const SSGM_ABI_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Status codes
// ---------------------------------------------------------------------------

/// Outcome of an FFI call. Mirrors the engine's error taxonomy one-to-one,
/// with transport-level additions (`NullArgument`, `InvalidUtf8`, `BadJson`)
/// and the two gate verdicts (`Rejected`, `Denied`), which are outcomes, not
/// errors: the request was understood and refused.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsgmStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An input string that must be JSON did not parse.
    BadJson = 3,
    /// The named source holds no provenance key.
    UnknownSource = 4,
    /// No live unit with the given idx.
    UnknownIdx = 5,
    /// A unit's origin references a ledger seq that does not exist.
    InvalidOrigin = 6,
    /// A replay range fell outside the ledger.
    OutOfRange = 7,
    /// The contradiction oracle failed instead of deciding.
    OracleFailure = 8,
    /// The ledger failed hash-chain verification.
    ChainInvalid = 9,
    /// A configuration value is out of range or unparseable.
    InvalidConfig = 10,
    /// The request was understood but structurally unusable
    /// (missing fields, unknown action).
    MalformedRequest = 11,
    /// Underlying file I/O failed.
    Storage = 12,
    /// The write gate refused the delta (contradiction or provenance);
    /// the audit entry's seq is still reported.
    Rejected = 13,
    /// The read/write gate refused the principal (policy or missing key).
    Denied = 14,
    /// A bug: a panic was caught at the boundary.
    Internal = 15,
}

fn status_of(err: &Error) -> SsgmStatus {
    match err {
        Error::UnknownSource(_) => SsgmStatus::UnknownSource,
        Error::StorageFailure(_) => SsgmStatus::Storage,
        Error::RangeOutOfBounds { .. } => SsgmStatus::OutOfRange,
        Error::InvalidOrigin(_) => SsgmStatus::InvalidOrigin,
        Error::UnknownIdx(_) => SsgmStatus::UnknownIdx,
        Error::OracleFailure(_) => SsgmStatus::OracleFailure,
        Error::ChainInvalid { .. } => SsgmStatus::ChainInvalid,
        Error::InvalidConfig(_) => SsgmStatus::InvalidConfig,
        Error::MalformedRequest(_) => SsgmStatus::MalformedRequest,
        // The FFI never binds a listener; reaching this is a bug.
        Error::BindFailure { .. } => SsgmStatus::Internal,
    }
}

// ---------------------------------------------------------------------------
// Last-error plumbing
// ---------------------------------------------------------------------------

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: SsgmStatus, msg: impl Into<Vec<u8>>) -> SsgmStatus {
    let cmsg = CString::new(msg).unwrap_or_else(|_| c"error message held a NUL byte".to_owned());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cmsg);
    status
}

fn fail_with(err: &Error) -> SsgmStatus {
    fail(status_of(err), err.to_string())
}

/// Description of the most recent failure on this thread, or an empty string
/// if nothing has failed yet. The pointer stays valid until the next failing
/// call on the same thread. Never free it.
#[no_mangle]
pub extern "C" fn ssgm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// Argument plumbing
// ---------------------------------------------------------------------------

/// Borrows a required C string as `&str`.
/// # Safety
/// `p` must be NULL or a valid NUL-terminated string.
unsafe fn arg_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, SsgmStatus> {
    if p.is_null() {
        return Err(fail(
            SsgmStatus::NullArgument,
            format!("`{name}` must not be NULL"),
        ));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        fail(
            SsgmStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

/// Like [`arg_str`] but NULL is an accepted "absent".
/// # Safety
/// `p` must be NULL or a valid NUL-terminated string.
unsafe fn arg_opt_str<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, SsgmStatus> {
    if p.is_null() {
        return Ok(None);
    }
    arg_str(p, name).map(Some)
}

fn give_string(s: String, out: *mut *mut c_char) -> SsgmStatus {
    if out.is_null() {
        return fail(SsgmStatus::NullArgument, "output pointer must not be NULL");
    }
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SsgmStatus::Ok
        }
        Err(_) => fail(SsgmStatus::Internal, "produced a string with a NUL byte"),
    }
}

fn guarded(f: impl FnOnce() -> SsgmStatus) -> SsgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "opaque panic payload".into());
            fail(SsgmStatus::Internal, format!("caught panic: {msg}"))
        }
    }
}

// ---------------------------------------------------------------------------
// Version / memory management
// ---------------------------------------------------------------------------

/// ABI revision of this header. Check against `SSGM_ABI_VERSION` at startup
/// if you load the library dynamically.
#[no_mangle]
pub extern "C" fn ssgm_abi_version() -> u32 {
    SSGM_ABI_VERSION
}

/// Releases a string returned through any `char **` out-parameter.
/// NULL is a no-op.
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn ssgm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Engine lifecycle
// ---------------------------------------------------------------------------

/// Opaque engine handle: one governed store (ledger + keyring + policy +
/// active memory) rooted at a data directory.
pub struct SsgmEngine {
    inner: Engine,
}

/// Opens (creating if absent) the governed store under `data_dir`, verifying
/// the ledger chain and replaying it into active memory. `config_path` may
/// be NULL for defaults or name a `section.key=value` config file. On
/// success `*out_engine` owns the handle; close it with
/// [`ssgm_engine_close`].
/// # Safety
/// `data_dir` and (when non-NULL) `config_path` must be valid
/// NUL-terminated strings; `out_engine` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssgm_engine_open(
    data_dir: *const c_char,
    config_path: *const c_char,
    out_engine: *mut *mut SsgmEngine,
) -> SsgmStatus {
    guarded(|| unsafe {
        if out_engine.is_null() {
            return fail(SsgmStatus::NullArgument, "`out_engine` must not be NULL");
        }
        let dir = match arg_str(data_dir, "data_dir") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let cfg = match arg_opt_str(config_path, "config_path") {
            Ok(None) => Config::default(),
            Ok(Some(p)) => match Config::load(Path::new(p)) {
                Ok(c) => c,
                Err(e) => return fail_with(&e),
            },
            Err(st) => return st,
        };
        match Engine::open(Path::new(dir), cfg) {
            Ok(inner) => {
                *out_engine = Box::into_raw(Box::new(SsgmEngine { inner }));
                SsgmStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Destroys a handle. NULL is a no-op. The data directory remains; a later
/// [`ssgm_engine_open`] replays it.
/// # Safety
/// `engine` must be NULL or a handle from [`ssgm_engine_open`] not yet
/// closed.
#[no_mangle]
pub unsafe extern "C" fn ssgm_engine_close(engine: *mut SsgmEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Shared prologue: borrow the handle or fail.
/// # Safety
/// `engine` must be NULL or a live handle from [`ssgm_engine_open`].
unsafe fn borrow_engine<'a>(engine: *mut SsgmEngine) -> Result<&'a mut SsgmEngine, SsgmStatus> {
    engine.as_mut().ok_or_else(|| {
        fail(SsgmStatus::NullArgument, "`engine` must not be NULL")
    })
}

// ---------------------------------------------------------------------------
// Provisioning
// ---------------------------------------------------------------------------

/// Registers `source_id` in the keyring (idempotent), so its writes pass
/// provenance checks.
/// # Safety
/// `engine` must be a live handle; `source_id` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn ssgm_register_source(
    engine: *mut SsgmEngine,
    source_id: *const c_char,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let source = match arg_str(source_id, "source_id") {
            Ok(s) => s,
            Err(st) => return st,
        };
        match eng.inner.register_source(source) {
            Ok(()) => SsgmStatus::Ok,
            Err(e) => fail_with(&e),
        }
    })
}

/// Replaces and persists the read-gate policy. `policy_text` is the same
/// TSV the policy file uses, one rule per line:
/// `scope_glob<TAB>attr=value,attr=value<TAB>allow|deny` (the attribute
/// list may be empty; `#` comments and blank lines are ignored). Rules are
/// ordered, first match decides, no match denies — a store opened without
/// ever installing a policy denies every read.
/// # Safety
/// `engine` must be a live handle; `policy_text` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn ssgm_install_policy(
    engine: *mut SsgmEngine,
    policy_text: *const c_char,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let text = match arg_str(policy_text, "policy_text") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let policy = match AccessPolicy::parse(text) {
            Ok(p) => p,
            Err(e) => return fail_with(&e),
        };
        match eng.inner.install_policy(policy) {
            Ok(()) => SsgmStatus::Ok,
            Err(e) => fail_with(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// The generic request path
// ---------------------------------------------------------------------------

/// Feeds one request through the engine exactly as the TCP gateway would:
/// `request_json` is a request object, `*out_response_json` receives the
/// response object. Transport-level problems (bad JSON, NULL) fail the
/// call; gate verdicts do **not** — the response's `status` field carries
/// them, same as on the wire.
/// # Safety
/// `engine` must be a live handle; `request_json` a valid NUL-terminated
/// string; `out_response_json` a valid pointer (free the result with
/// [`ssgm_string_free`]).
#[no_mangle]
pub unsafe extern "C" fn ssgm_handle_json(
    engine: *mut SsgmEngine,
    request_json: *const c_char,
    out_response_json: *mut *mut c_char,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let raw = match arg_str(request_json, "request_json") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let req: Request = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(e) => return fail(SsgmStatus::BadJson, format!("request_json: {e}")),
        };
        let resp = eng.inner.handle(&req);
        match serde_json::to_string(&resp) {
            Ok(s) => give_string(s, out_response_json),
            Err(e) => fail(SsgmStatus::Internal, format!("response encoding: {e}")),
        }
    })
}

// ---------------------------------------------------------------------------
// Typed writes
// ---------------------------------------------------------------------------

/// Maps a gateway response onto a status, extracting idx/seq when present.
/// # Safety
/// `out_idx` and `out_seq` must each be NULL or valid pointers.
unsafe fn settle_write(
    resp: &ssgm_core::Response,
    out_idx: *mut u64,
    out_seq: *mut u64,
) -> SsgmStatus {
    if let (Some(seq), false) = (resp.seq, out_seq.is_null()) {
        *out_seq = seq;
    }
    match resp.status.as_str() {
        "ok" => {
            if let (Some(idx), false) = (resp.idx, out_idx.is_null()) {
                *out_idx = idx;
            }
            SsgmStatus::Ok
        }
        "rejected" => fail(
            SsgmStatus::Rejected,
            resp.detail
                .clone()
                .or_else(|| resp.reason.clone())
                .unwrap_or_else(|| "rejected".into()),
        ),
        "denied" => fail(
            SsgmStatus::Denied,
            resp.detail
                .clone()
                .or_else(|| resp.reason.clone())
                .unwrap_or_else(|| "denied".into()),
        ),
        _ => {
            let msg = resp.error.clone().unwrap_or_else(|| "error".into());
            if msg.starts_with("unknown unit idx") {
                fail(SsgmStatus::UnknownIdx, msg)
            } else {
                fail(SsgmStatus::MalformedRequest, msg)
            }
        }
    }
}

fn parse_slots(raw: Option<&str>) -> Result<Vec<Triple>, SsgmStatus> {
    match raw {
        None => Ok(Vec::new()),
        Some(s) => serde_json::from_str::<Vec<Triple>>(s).map_err(|e| {
            fail(
                SsgmStatus::BadJson,
                format!("slots_json must be an array of [subject, attribute, value] triples: {e}"),
            )
        }),
    }
}

/// Proposes a new unit through the write gate. `scope` is the label access
/// rules match against and is required. `slots_json` may be NULL or a JSON
/// array of `[subject, attribute, value]` triples; `core` marks the unit as
/// a core fact; `privileged` lets the delta touch core state.
/// On admission `*out_idx`/`*out_seq` receive the unit idx and ledger seq
/// (each may be NULL if not wanted). On `SSGM_STATUS_REJECTED` the audit
/// entry's seq is still written to `*out_seq`.
/// # Safety
/// `engine` must be a live handle; string arguments as documented;
/// `out_idx`/`out_seq` each NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn ssgm_add(
    engine: *mut SsgmEngine,
    source_id: *const c_char,
    content: *const c_char,
    scope: *const c_char,
    slots_json: *const c_char,
    core: bool,
    privileged: bool,
    out_idx: *mut u64,
    out_seq: *mut u64,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let source = match arg_str(source_id, "source_id") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let text = match arg_str(content, "content") {
            Ok(c) => c,
            Err(st) => return st,
        };
        let scope = match arg_str(scope, "scope") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let slots = match arg_opt_str(slots_json, "slots_json").and_then(parse_slots) {
            Ok(v) => v,
            Err(st) => return st,
        };
        let mut req = Request::new(source, "add");
        req.content = Some(text.to_string());
        req.scope = Some(scope.to_string());
        req.slots = slots;
        req.core = core;
        req.privileged = privileged;
        settle_write(&eng.inner.handle(&req), out_idx, out_seq)
    })
}

/// Revises unit `idx` through the write gate (content and slots replace the
/// old ones). See [`ssgm_add`] for `slots_json` and out-parameter rules.
/// # Safety
/// As [`ssgm_add`], minus `out_idx`.
#[no_mangle]
pub unsafe extern "C" fn ssgm_update(
    engine: *mut SsgmEngine,
    source_id: *const c_char,
    idx: u64,
    content: *const c_char,
    slots_json: *const c_char,
    privileged: bool,
    out_seq: *mut u64,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let source = match arg_str(source_id, "source_id") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let text = match arg_str(content, "content") {
            Ok(c) => c,
            Err(st) => return st,
        };
        let slots = match arg_opt_str(slots_json, "slots_json").and_then(parse_slots) {
            Ok(v) => v,
            Err(st) => return st,
        };
        let mut req = Request::new(source, "update");
        req.idx = Some(idx);
        req.content = Some(text.to_string());
        req.slots = slots;
        req.privileged = privileged;
        settle_write(&eng.inner.handle(&req), std::ptr::null_mut(), out_seq)
    })
}

/// Retires unit `idx` (tombstone in the ledger, removed from active
/// memory).
/// # Safety
/// As [`ssgm_update`], minus content and slots.
#[no_mangle]
pub unsafe extern "C" fn ssgm_delete(
    engine: *mut SsgmEngine,
    source_id: *const c_char,
    idx: u64,
    privileged: bool,
    out_seq: *mut u64,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let source = match arg_str(source_id, "source_id") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let mut req = Request::new(source, "delete");
        req.idx = Some(idx);
        req.privileged = privileged;
        settle_write(&eng.inner.handle(&req), std::ptr::null_mut(), out_seq)
    })
}

// ---------------------------------------------------------------------------
// Reads
// ---------------------------------------------------------------------------

/// Runs the gated read pipeline for `principal` and writes the surviving
/// units to `*out_units_json` as a JSON array (possibly `[]`; never
/// backfilled). `attrs` may be NULL or a comma-separated list of
/// `attr=value` identity claims; `k` is the candidate pool size, `0` for
/// the engine default. A policy refusal is an empty result, not an error —
/// the caller cannot distinguish "nothing matched" from "not yours to
/// read", by design.
/// # Safety
/// `engine` must be a live handle; strings as documented;
/// `out_units_json` a valid pointer (free with [`ssgm_string_free`]).
#[no_mangle]
pub unsafe extern "C" fn ssgm_retrieve(
    engine: *mut SsgmEngine,
    principal: *const c_char,
    attrs: *const c_char,
    query: *const c_char,
    k: usize,
    out_units_json: *mut *mut c_char,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let who = match arg_str(principal, "principal") {
            Ok(p) => p,
            Err(st) => return st,
        };
        let text = match arg_str(query, "query") {
            Ok(q) => q,
            Err(st) => return st,
        };
        let attrs = match arg_opt_str(attrs, "attrs") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let mut req = Request::new(who, "retrieve");
        req.query = Some(text.to_string());
        req.attrs = attrs
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|a| !a.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        req.k = (k > 0).then_some(k);
        let resp = eng.inner.handle(&req);
        match resp.status.as_str() {
            "ok" => match serde_json::to_string(&resp.units.unwrap_or_default()) {
                Ok(s) => give_string(s, out_units_json),
                Err(e) => fail(SsgmStatus::Internal, format!("unit encoding: {e}")),
            },
            // Only the MAC requirement can deny a read; the policy itself
            // filters silently.
            "denied" => fail(
                SsgmStatus::Denied,
                resp.detail
                    .or(resp.reason)
                    .unwrap_or_else(|| "denied".into()),
            ),
            _ => fail(
                SsgmStatus::MalformedRequest,
                resp.error.unwrap_or_else(|| "error".into()),
            ),
        }
    })
}

// ---------------------------------------------------------------------------
// Maintenance
// ---------------------------------------------------------------------------

/// Re-verifies the full hash chain (and every provenance tag) under the
/// engine's keyring. `out_entries` (NULL ok) receives the number of entries
/// checked. An invalid chain comes back as `SSGM_STATUS_CHAIN_INVALID` with
/// the first bad seq in the error message.
/// # Safety
/// `engine` must be a live handle; `out_entries` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn ssgm_verify_chain(
    engine: *mut SsgmEngine,
    out_entries: *mut u64,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let report = eng.inner.ledger().verify_chain(Some(eng.inner.keyring()));
        if !out_entries.is_null() {
            *out_entries = report.entries_checked;
        }
        if report.valid {
            SsgmStatus::Ok
        } else {
            fail(
                SsgmStatus::ChainInvalid,
                format!(
                    "chain invalid at seq {}: {}",
                    report.first_bad_seq.unwrap_or(0),
                    report.detail.unwrap_or_else(|| "unspecified".into()),
                ),
            )
        }
    })
}

/// Forces a reconciliation pass now (normally they run on the configured
/// period). `out_report_json` (NULL ok) receives `{step, units_checked,
/// units_corrected, pre_drift, post_drift}`.
/// # Safety
/// `engine` must be a live handle; `out_report_json` NULL or valid (free
/// with [`ssgm_string_free`]).
#[no_mangle]
pub unsafe extern "C" fn ssgm_reconcile(
    engine: *mut SsgmEngine,
    out_report_json: *mut *mut c_char,
) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        let report = match eng.inner.reconcile_now() {
            Ok(r) => r,
            Err(e) => return fail_with(&e),
        };
        if out_report_json.is_null() {
            return SsgmStatus::Ok;
        }
        let json = serde_json::json!({
            "step": report.step,
            "units_checked": report.units_checked,
            "units_corrected": report.units_corrected,
            "pre_drift": report.pre_drift,
            "post_drift": report.post_drift,
        });
        give_string(json.to_string(), out_report_json)
    })
}

/// Writes a point-in-time snapshot (state plus usage stamps) into the data
/// directory, so the next open can restore retrieval recency exactly.
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssgm_export_snapshot(engine: *mut SsgmEngine) -> SsgmStatus {
    guarded(|| unsafe {
        let eng = match borrow_engine(engine) {
            Ok(e) => e,
            Err(st) => return st,
        };
        match eng.inner.export_snapshot() {
            Ok(()) => SsgmStatus::Ok,
            Err(e) => fail_with(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// Pure helpers (no handle needed)
// ---------------------------------------------------------------------------

/// Freshness weight of a unit last used `age_turns` ago under a Weibull
/// decay with scale `eta` and shape `kappa`. Fails with
/// `SSGM_STATUS_INVALID_CONFIG` when the parameters are not positive and
/// finite.
/// # Safety
/// `out_weight` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssgm_freshness(
    age_turns: u64,
    eta: f64,
    kappa: f64,
    out_weight: *mut f64,
) -> SsgmStatus {
    guarded(|| unsafe {
        if out_weight.is_null() {
            return fail(SsgmStatus::NullArgument, "`out_weight` must not be NULL");
        }
        match DecayConfig::new(eta, kappa, 0.0) {
            Ok(decay) => {
                *out_weight = freshness(age_turns, &decay);
                SsgmStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Semantic divergence between two texts in `[0, 2]`: `0` for identical
/// feature sets, `1` for orthogonal ones.
/// # Safety
/// `text_a` and `text_b` must be valid NUL-terminated strings;
/// `out_delta` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssgm_drift(
    text_a: *const c_char,
    text_b: *const c_char,
    out_delta: *mut f64,
) -> SsgmStatus {
    guarded(|| unsafe {
        if out_delta.is_null() {
            return fail(SsgmStatus::NullArgument, "`out_delta` must not be NULL");
        }
        let a = match arg_str(text_a, "text_a") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let b = match arg_str(text_b, "text_b") {
            Ok(s) => s,
            Err(st) => return st,
        };
        *out_delta = drift(a, b);
        SsgmStatus::Ok
    })
}
