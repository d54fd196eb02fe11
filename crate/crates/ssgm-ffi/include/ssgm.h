#ifndef SSGM_H
#define SSGM_H

/* Generated by cbindgen from the ssgm-ffi crate. Do not edit by hand; rebuild the crate to refresh. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Bumped whenever the exported surface changes incompatibly.
#define SSGM_ABI_VERSION 1

// Outcome of an FFI call. Mirrors the engine's error taxonomy one-to-one,
// with transport-level additions (`NullArgument`, `InvalidUtf8`, `BadJson`)
// and the two gate verdicts (`Rejected`, `Denied`), which are outcomes, not
// errors: the request was understood and refused.
typedef enum {
  SSGM_STATUS_OK = 0,
  // A required pointer argument was NULL.
  SSGM_STATUS_NULL_ARGUMENT = 1,
  // An input string was not valid UTF-8.
  SSGM_STATUS_INVALID_UTF8 = 2,
  // An input string that must be JSON did not parse.
  SSGM_STATUS_BAD_JSON = 3,
  // The named source holds no provenance key.
  SSGM_STATUS_UNKNOWN_SOURCE = 4,
  // No live unit with the given idx.
  SSGM_STATUS_UNKNOWN_IDX = 5,
  // A unit's origin references a ledger seq that does not exist.
  SSGM_STATUS_INVALID_ORIGIN = 6,
  // A replay range fell outside the ledger.
  SSGM_STATUS_OUT_OF_RANGE = 7,
  // The contradiction oracle failed instead of deciding.
  SSGM_STATUS_ORACLE_FAILURE = 8,
  // The ledger failed hash-chain verification.
  SSGM_STATUS_CHAIN_INVALID = 9,
  // A configuration value is out of range or unparseable.
  SSGM_STATUS_INVALID_CONFIG = 10,
  // The request was understood but structurally unusable
  // (missing fields, unknown action).
  SSGM_STATUS_MALFORMED_REQUEST = 11,
  // Underlying file I/O failed.
  SSGM_STATUS_STORAGE = 12,
  // The write gate refused the delta (contradiction or provenance);
  // the audit entry's seq is still reported.
  SSGM_STATUS_REJECTED = 13,
  // The read/write gate refused the principal (policy or missing key).
  SSGM_STATUS_DENIED = 14,
  // A bug: a panic was caught at the boundary.
  SSGM_STATUS_INTERNAL = 15,
} SsgmStatus;

// Opaque engine handle: one governed store (ledger + keyring + policy +
// active memory) rooted at a data directory.
typedef struct SsgmEngine SsgmEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the most recent failure on this thread, or an empty string
// if nothing has failed yet. The pointer stays valid until the next failing
// call on the same thread. Never free it.
const char *ssgm_last_error_message(void);

// ABI revision of this header. Check against `SSGM_ABI_VERSION` at startup
// if you load the library dynamically.
uint32_t ssgm_abi_version(void);

// Releases a string returned through any `char **` out-parameter.
// NULL is a no-op.
// # Safety
// `s` must be NULL or a pointer obtained from this library and not yet
// freed.
void ssgm_string_free(char *s);

// Opens (creating if absent) the governed store under `data_dir`, verifying
// the ledger chain and replaying it into active memory. `config_path` may
// be NULL for defaults or name a `section.key=value` config file. On
// success `*out_engine` owns the handle; close it with
// [`ssgm_engine_close`].
// # Safety
// `data_dir` and (when non-NULL) `config_path` must be valid
// NUL-terminated strings; `out_engine` must be a valid pointer.
SsgmStatus ssgm_engine_open(const char *data_dir, const char *config_path, SsgmEngine **out_engine);

// Destroys a handle. NULL is a no-op. The data directory remains; a later
// [`ssgm_engine_open`] replays it.
// # Safety
// `engine` must be NULL or a handle from [`ssgm_engine_open`] not yet
// closed.
void ssgm_engine_close(SsgmEngine *engine);

// Registers `source_id` in the keyring (idempotent), so its writes pass
// provenance checks.
// # Safety
// `engine` must be a live handle; `source_id` a valid NUL-terminated
// string.
SsgmStatus ssgm_register_source(SsgmEngine *engine, const char *source_id);

// Replaces and persists the read-gate policy. `policy_text` is the same
// TSV the policy file uses, one rule per line:
// `scope_glob<TAB>attr=value,attr=value<TAB>allow|deny` (the attribute
// list may be empty; `#` comments and blank lines are ignored). Rules are
// ordered, first match decides, no match denies — a store opened without
// ever installing a policy denies every read.
// # Safety
// `engine` must be a live handle; `policy_text` a valid NUL-terminated
// string.
SsgmStatus ssgm_install_policy(SsgmEngine *engine, const char *policy_text);

// Feeds one request through the engine exactly as the TCP gateway would:
// `request_json` is a request object, `*out_response_json` receives the
// response object. Transport-level problems (bad JSON, NULL) fail the
// call; gate verdicts do **not** — the response's `status` field carries
// them, same as on the wire.
// # Safety
// `engine` must be a live handle; `request_json` a valid NUL-terminated
// string; `out_response_json` a valid pointer (free the result with
// [`ssgm_string_free`]).
SsgmStatus ssgm_handle_json(SsgmEngine *engine, const char *request_json, char **out_response_json);

// Proposes a new unit through the write gate. `scope` is the label access
// rules match against and is required. `slots_json` may be NULL or a JSON
// array of `[subject, attribute, value]` triples; `core` marks the unit as
// a core fact; `privileged` lets the delta touch core state.
// On admission `*out_idx`/`*out_seq` receive the unit idx and ledger seq
// (each may be NULL if not wanted). On `SSGM_STATUS_REJECTED` the audit
// entry's seq is still written to `*out_seq`.
// # Safety
// `engine` must be a live handle; string arguments as documented;
// `out_idx`/`out_seq` each NULL or valid.
SsgmStatus ssgm_add(SsgmEngine *engine,
                    const char *source_id,
                    const char *content,
                    const char *scope,
                    const char *slots_json,
                    bool core,
                    bool privileged,
                    uint64_t *out_idx,
                    uint64_t *out_seq);

// Revises unit `idx` through the write gate (content and slots replace the
// old ones). See [`ssgm_add`] for `slots_json` and out-parameter rules.
// # Safety
// As [`ssgm_add`], minus `out_idx`.
SsgmStatus ssgm_update(SsgmEngine *engine,
                       const char *source_id,
                       uint64_t idx,
                       const char *content,
                       const char *slots_json,
                       bool privileged,
                       uint64_t *out_seq);

// Retires unit `idx` (tombstone in the ledger, removed from active
// memory).
// # Safety
// As [`ssgm_update`], minus content and slots.
SsgmStatus ssgm_delete(SsgmEngine *engine,
                       const char *source_id,
                       uint64_t idx,
                       bool privileged,
                       uint64_t *out_seq);

// Runs the gated read pipeline for `principal` and writes the surviving
// units to `*out_units_json` as a JSON array (possibly `[]`; never
// backfilled). `attrs` may be NULL or a comma-separated list of
// `attr=value` identity claims; `k` is the candidate pool size, `0` for
// the engine default. A policy refusal is an empty result, not an error —
// the caller cannot distinguish "nothing matched" from "not yours to
// read", by design.
// # Safety
// `engine` must be a live handle; strings as documented;
// `out_units_json` a valid pointer (free with [`ssgm_string_free`]).
SsgmStatus ssgm_retrieve(SsgmEngine *engine,
                         const char *principal,
                         const char *attrs,
                         const char *query,
                         size_t k,
                         char **out_units_json);

// Re-verifies the full hash chain (and every provenance tag) under the
// engine's keyring. `out_entries` (NULL ok) receives the number of entries
// checked. An invalid chain comes back as `SSGM_STATUS_CHAIN_INVALID` with
// the first bad seq in the error message.
// # Safety
// `engine` must be a live handle; `out_entries` NULL or valid.
SsgmStatus ssgm_verify_chain(SsgmEngine *engine, uint64_t *out_entries);

// Forces a reconciliation pass now (normally they run on the configured
// period). `out_report_json` (NULL ok) receives `{step, units_checked,
// units_corrected, pre_drift, post_drift}`.
// # Safety
// `engine` must be a live handle; `out_report_json` NULL or valid (free
// with [`ssgm_string_free`]).
SsgmStatus ssgm_reconcile(SsgmEngine *engine, char **out_report_json);

// Writes a point-in-time snapshot (state plus usage stamps) into the data
// directory, so the next open can restore retrieval recency exactly.
// # Safety
// `engine` must be a live handle.
SsgmStatus ssgm_export_snapshot(SsgmEngine *engine);

// Freshness weight of a unit last used `age_turns` ago under a Weibull
// decay with scale `eta` and shape `kappa`. Fails with
// `SSGM_STATUS_INVALID_CONFIG` when the parameters are not positive and
// finite.
// # Safety
// `out_weight` must be a valid pointer.
SsgmStatus ssgm_freshness(uint64_t age_turns, double eta, double kappa, double *out_weight);

// Semantic divergence between two texts in `[0, 2]`: `0` for identical
// feature sets, `1` for orthogonal ones.
// # Safety
// `text_a` and `text_b` must be valid NUL-terminated strings;
// `out_delta` a valid pointer.
SsgmStatus ssgm_drift(const char *text_a, const char *text_b, double *out_delta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSGM_H */
