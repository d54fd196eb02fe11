//! Drives the C ABI from Rust: the same pointer discipline a C caller
//! would use, without needing a C toolchain. The compiled-C walkthrough
//! lives in `c_smoke.rs`.

use std::ffi::{CStr, CString};
use std::ptr;

use ssgm_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ssgm_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

/// Takes ownership of an out-string and frees the C allocation.
unsafe fn claim(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    ssgm_string_free(p);
    s
}

struct Handle(*mut SsgmEngine);

impl Handle {
    fn open(dir: &std::path::Path) -> Self {
        let dir = cs(dir.to_str().unwrap());
        let mut raw: *mut SsgmEngine = ptr::null_mut();
        let st = unsafe { ssgm_engine_open(dir.as_ptr(), ptr::null(), &mut raw) };
        assert_eq!(st, SsgmStatus::Ok, "{}", last_error());
        assert!(!raw.is_null());
        Handle(raw)
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { ssgm_engine_close(self.0) };
    }
}

#[test]
fn full_lifecycle_through_the_c_surface() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Handle::open(dir.path());
    let assistant = cs("assistant");
    assert_eq!(
        unsafe { ssgm_register_source(engine.0, assistant.as_ptr()) },
        SsgmStatus::Ok
    );
    // Reads deny by default; open the store up for this walkthrough.
    let policy = cs("*\t\tallow");
    assert_eq!(
        unsafe { ssgm_install_policy(engine.0, policy.as_ptr()) },
        SsgmStatus::Ok
    );

    // Core anchor.
    let (mut idx, mut seq) = (u64::MAX, u64::MAX);
    let content = cs("the user lives in Paris");
    let scope = cs("profile");
    let slots = cs(r#"[["user","city","Paris"]]"#);
    let st = unsafe {
        ssgm_add(
            engine.0,
            assistant.as_ptr(),
            content.as_ptr(),
            scope.as_ptr(),
            slots.as_ptr(),
            true,
            false,
            &mut idx,
            &mut seq,
        )
    };
    assert_eq!(st, SsgmStatus::Ok, "{}", last_error());
    assert_eq!((idx, seq), (0, 0));

    // A second, plain unit — NULL slots and NULL out_idx are both fine.
    let hiking = cs("the user enjoys hiking");
    let mut seq2 = 0u64;
    let st = unsafe {
        ssgm_add(
            engine.0,
            assistant.as_ptr(),
            hiking.as_ptr(),
            scope.as_ptr(),
            ptr::null(),
            false,
            false,
            ptr::null_mut(),
            &mut seq2,
        )
    };
    assert_eq!(st, SsgmStatus::Ok);
    assert_eq!(seq2, 1);

    // The contradiction is refused but still audited: the seq out-param
    // names the audit entry.
    let lyon = cs("the user lives in Lyon");
    let lyon_slots = cs(r#"[["user","city","Lyon"]]"#);
    let mut audit_seq = 0u64;
    let st = unsafe {
        ssgm_add(
            engine.0,
            assistant.as_ptr(),
            lyon.as_ptr(),
            scope.as_ptr(),
            lyon_slots.as_ptr(),
            false,
            false,
            ptr::null_mut(),
            &mut audit_seq,
        )
    };
    assert_eq!(st, SsgmStatus::Rejected);
    assert_eq!(audit_seq, 2);
    assert!(
        last_error().contains("contradicts core"),
        "unhelpful rejection message: {}",
        last_error()
    );

    // Gated read back.
    let query = cs("where does the user live");
    let mut units_raw: *mut std::ffi::c_char = ptr::null_mut();
    let st = unsafe {
        ssgm_retrieve(
            engine.0,
            assistant.as_ptr(),
            ptr::null(),
            query.as_ptr(),
            3,
            &mut units_raw,
        )
    };
    assert_eq!(st, SsgmStatus::Ok);
    let units: serde_json::Value = serde_json::from_str(&unsafe { claim(units_raw) }).unwrap();
    let arr = units.as_array().unwrap();
    assert!(!arr.is_empty());
    assert!(arr.iter().any(|u| u["content"]
        .as_str()
        .unwrap()
        .contains("Paris")));

    // Update then delete the plain unit.
    let revised = cs("the user enjoys alpine hiking");
    let mut upd_seq = 0u64;
    let st = unsafe {
        ssgm_update(
            engine.0,
            assistant.as_ptr(),
            1,
            revised.as_ptr(),
            ptr::null(),
            false,
            &mut upd_seq,
        )
    };
    assert_eq!(st, SsgmStatus::Ok, "{}", last_error());
    let st = unsafe { ssgm_delete(engine.0, assistant.as_ptr(), 1, false, ptr::null_mut()) };
    assert_eq!(st, SsgmStatus::Ok, "{}", last_error());

    // Chain verification sees every entry written so far.
    let mut entries = 0u64;
    assert_eq!(
        unsafe { ssgm_verify_chain(engine.0, &mut entries) },
        SsgmStatus::Ok
    );
    assert_eq!(entries, 5); // add, add, rejection audit, update, delete

    // Forced reconciliation on an honest store corrects nothing.
    let mut report_raw: *mut std::ffi::c_char = ptr::null_mut();
    assert_eq!(
        unsafe { ssgm_reconcile(engine.0, &mut report_raw) },
        SsgmStatus::Ok
    );
    let report: serde_json::Value = serde_json::from_str(&unsafe { claim(report_raw) }).unwrap();
    assert_eq!(report["units_corrected"], 0);
    assert_eq!(report["post_drift"], 0.0);

    assert_eq!(unsafe { ssgm_export_snapshot(engine.0) }, SsgmStatus::Ok);
}

#[test]
fn handle_json_mirrors_the_wire_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Handle::open(dir.path());
    let writer = cs("writer");
    unsafe { ssgm_register_source(engine.0, writer.as_ptr()) };

    let req = cs(r#"{"id":7,"principal":"writer","action":"add","content":"golden retrievers are dogs","scope":"notes"}"#);
    let mut resp_raw: *mut std::ffi::c_char = ptr::null_mut();
    let st = unsafe { ssgm_handle_json(engine.0, req.as_ptr(), &mut resp_raw) };
    assert_eq!(st, SsgmStatus::Ok);
    let resp: serde_json::Value = serde_json::from_str(&unsafe { claim(resp_raw) }).unwrap();
    assert_eq!(resp["id"], 7);
    assert_eq!(resp["status"], "ok");
    assert_eq!(resp["idx"], 0);

    // A gate refusal is a successful call: the verdict travels in the
    // response, exactly as over TCP.
    let denied = cs(r#"{"principal":"stranger","action":"add","content":"anything","scope":"notes"}"#);
    let mut resp_raw: *mut std::ffi::c_char = ptr::null_mut();
    let st = unsafe { ssgm_handle_json(engine.0, denied.as_ptr(), &mut resp_raw) };
    assert_eq!(st, SsgmStatus::Ok);
    let resp: serde_json::Value = serde_json::from_str(&unsafe { claim(resp_raw) }).unwrap();
    assert_eq!(resp["status"], "denied");

    // Unknown fields are rejected at the parse step, like the server does.
    let sneaky = cs(r#"{"principal":"writer","action":"add","content":"x","sneaky":1}"#);
    let mut resp_raw: *mut std::ffi::c_char = ptr::null_mut();
    let st = unsafe { ssgm_handle_json(engine.0, sneaky.as_ptr(), &mut resp_raw) };
    assert_eq!(st, SsgmStatus::BadJson);
    assert!(resp_raw.is_null());
}

#[test]
fn argument_faults_are_reported_not_crashed() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Handle::open(dir.path());
    let writer = cs("writer");
    unsafe { ssgm_register_source(engine.0, writer.as_ptr()) };

    // NULL engine.
    let st = unsafe { ssgm_register_source(ptr::null_mut(), writer.as_ptr()) };
    assert_eq!(st, SsgmStatus::NullArgument);
    assert!(last_error().contains("engine"));

    // NULL required string.
    let mut out = ptr::null_mut();
    let st = unsafe { ssgm_engine_open(ptr::null(), ptr::null(), &mut out) };
    assert_eq!(st, SsgmStatus::NullArgument);
    assert!(last_error().contains("data_dir"));

    // Invalid UTF-8 in a string argument.
    let bad = CString::new([0x66, 0xff, 0xfe]).unwrap();
    let st = unsafe { ssgm_register_source(engine.0, bad.as_ptr()) };
    assert_eq!(st, SsgmStatus::InvalidUtf8);

    // Bad slots JSON.
    let content = cs("x");
    let scope = cs("notes");
    let not_json = cs("[[unquoted]]");
    let st = unsafe {
        ssgm_add(
            engine.0,
            writer.as_ptr(),
            content.as_ptr(),
            scope.as_ptr(),
            not_json.as_ptr(),
            false,
            false,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SsgmStatus::BadJson);
    assert!(last_error().contains("slots_json"));

    // Update of a unit that does not exist.
    let st = unsafe {
        ssgm_update(
            engine.0,
            writer.as_ptr(),
            99,
            content.as_ptr(),
            ptr::null(),
            false,
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SsgmStatus::UnknownIdx);
    assert!(last_error().contains("99"));

    // An unregistered writer is refused by provenance.
    let stranger = cs("stranger");
    let st = unsafe {
        ssgm_add(
            engine.0,
            stranger.as_ptr(),
            content.as_ptr(),
            scope.as_ptr(),
            ptr::null(),
            false,
            false,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SsgmStatus::Denied);

    // Freeing NULL is a no-op; closing NULL is a no-op.
    unsafe { ssgm_string_free(ptr::null_mut()) };
    unsafe { ssgm_engine_close(ptr::null_mut()) };
}

#[test]
fn config_file_problems_surface_as_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("broken.conf");
    std::fs::write(&cfg_path, "decay.eta=not-a-number\n").unwrap();
    let data = cs(dir.path().join("data").to_str().unwrap());
    let cfg = cs(cfg_path.to_str().unwrap());
    let mut out: *mut SsgmEngine = ptr::null_mut();
    let st = unsafe { ssgm_engine_open(data.as_ptr(), cfg.as_ptr(), &mut out) };
    assert_eq!(st, SsgmStatus::InvalidConfig);
    assert!(out.is_null());
}

#[test]
fn snapshots_persist_usage_stamps_across_reopen() {
    let dir = tempfile::tempdir().unwrap();
    {
        let engine = Handle::open(dir.path());
        let w = cs("writer");
        unsafe { ssgm_register_source(engine.0, w.as_ptr()) };
        let policy = cs("*\t\tallow");
        assert_eq!(
            unsafe { ssgm_install_policy(engine.0, policy.as_ptr()) },
            SsgmStatus::Ok
        );
        let scope = cs("notes");
        for text in ["alpha fact", "beta fact", "gamma fact"] {
            let c = cs(text);
            let st = unsafe {
                ssgm_add(
                    engine.0,
                    w.as_ptr(),
                    c.as_ptr(),
                    scope.as_ptr(),
                    ptr::null(),
                    false,
                    false,
                    ptr::null_mut(),
                    ptr::null_mut(),
                )
            };
            assert_eq!(st, SsgmStatus::Ok);
        }
        let q = cs("beta");
        let mut raw = ptr::null_mut();
        assert_eq!(
            unsafe { ssgm_retrieve(engine.0, w.as_ptr(), ptr::null(), q.as_ptr(), 1, &mut raw) },
            SsgmStatus::Ok
        );
        let _ = unsafe { claim(raw) };
        assert_eq!(unsafe { ssgm_export_snapshot(engine.0) }, SsgmStatus::Ok);
    }

    // Reopen: chain verifies, and the store still holds all three units.
    let engine = Handle::open(dir.path());
    let w = cs("writer");
    let mut entries = 0u64;
    assert_eq!(
        unsafe { ssgm_verify_chain(engine.0, &mut entries) },
        SsgmStatus::Ok
    );
    assert_eq!(entries, 3);
    let q = cs("fact");
    let mut raw = ptr::null_mut();
    assert_eq!(
        unsafe { ssgm_retrieve(engine.0, w.as_ptr(), ptr::null(), q.as_ptr(), 10, &mut raw) },
        SsgmStatus::Ok
    );
    let units: serde_json::Value = serde_json::from_str(&unsafe { claim(raw) }).unwrap();
    assert_eq!(units.as_array().unwrap().len(), 3);
}

#[test]
fn tenant_policy_filters_reads_without_erroring() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Handle::open(dir.path());
    let w = cs("writer");
    unsafe { ssgm_register_source(engine.0, w.as_ptr()) };
    // Readable only with the matching tenant claim; no default-allow tail.
    let policy = cs("tenant-a\ttenant=a\tallow\ntenant-b\ttenant=b\tallow");
    assert_eq!(
        unsafe { ssgm_install_policy(engine.0, policy.as_ptr()) },
        SsgmStatus::Ok
    );

    for (text, scope) in [("the a secret", "tenant-a"), ("the b secret", "tenant-b")] {
        let c = cs(text);
        let s = cs(scope);
        let st = unsafe {
            ssgm_add(
                engine.0,
                w.as_ptr(),
                c.as_ptr(),
                s.as_ptr(),
                ptr::null(),
                false,
                false,
                ptr::null_mut(),
                ptr::null_mut(),
            )
        };
        assert_eq!(st, SsgmStatus::Ok);
    }

    let q = cs("secret");
    let probe = |attrs: Option<&CString>| -> Vec<String> {
        let mut raw = ptr::null_mut();
        let st = unsafe {
            ssgm_retrieve(
                engine.0,
                w.as_ptr(),
                attrs.map_or(ptr::null(), |a| a.as_ptr()),
                q.as_ptr(),
                10,
                &mut raw,
            )
        };
        assert_eq!(st, SsgmStatus::Ok);
        let units: serde_json::Value = serde_json::from_str(&unsafe { claim(raw) }).unwrap();
        units
            .as_array()
            .unwrap()
            .iter()
            .map(|u| u["scope"].as_str().unwrap().to_string())
            .collect()
    };

    let a = cs("tenant=a");
    assert_eq!(probe(Some(&a)), ["tenant-a"]);
    let b = cs("tenant=b");
    assert_eq!(probe(Some(&b)), ["tenant-b"]);
    // No claim, no units — and no error to probe at.
    assert!(probe(None).is_empty());
}

#[test]
fn pure_helpers_match_library_semantics() {
    let mut w = 0.0f64;
    assert_eq!(unsafe { ssgm_freshness(10, 10.0, 2.0, &mut w) }, SsgmStatus::Ok);
    assert!((w - (-1.0f64).exp()).abs() < 1e-12);

    let a = cs("amber basalt");
    let mut d = -1.0f64;
    assert_eq!(
        unsafe { ssgm_drift(a.as_ptr(), a.as_ptr(), &mut d) },
        SsgmStatus::Ok
    );
    assert_eq!(d, 0.0);

    assert_eq!(ssgm_abi_version(), 1);
}
