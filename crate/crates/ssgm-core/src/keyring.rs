//! Per-source provenance keys.
//!
//! Every ledger entry carries an HMAC-SHA-256 tag computed under the key of
//! the source that caused it, so a verifier holding the keyring can tell
//! which entries were written by holders of registered keys and which were
//! forged or corrupted. Keys live in a plain keyring file, one
//! `source_id<TAB>hex_key` line per source, sorted by source id.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use hmac::{Hmac, KeyInit, Mac};
use rand::RngCore;
use sha2::Sha256;

use crate::error::{Error, Result};
use crate::ledger::Digest;

type HmacSha256 = Hmac<Sha256>;

pub const KEY_LEN: usize = 32;

/// In-memory keyring; persistence is explicit via [`Keyring::load`] /
/// [`Keyring::save`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Keyring {
    keys: BTreeMap<String, [u8; KEY_LEN]>,
}

impl Keyring {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `source_id` with a fresh random key; returns the key.
    /// Re-registering an existing source replaces its key.
    pub fn register(&mut self, source_id: &str) -> [u8; KEY_LEN] {
        let mut key = [0u8; KEY_LEN];
        rand::rng().fill_bytes(&mut key);
        self.keys.insert(source_id.to_string(), key);
        key
    }

    /// Registers a source with a caller-chosen key (tests and deterministic
    /// simulations).
    pub fn register_with_key(&mut self, source_id: &str, key: [u8; KEY_LEN]) {
        self.keys.insert(source_id.to_string(), key);
    }

    pub fn contains(&self, source_id: &str) -> bool {
        self.keys.contains_key(source_id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    /// HMAC-SHA-256 tag over `payload` under `source_id`'s key.
    pub fn tag(&self, source_id: &str, payload: &[u8]) -> Result<Digest> {
        let key = self
            .keys
            .get(source_id)
            .ok_or_else(|| Error::UnknownSource(source_id.to_string()))?;
        let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
        mac.update(payload);
        let out = mac.finalize().into_bytes();
        let mut tag = [0u8; 32];
        tag.copy_from_slice(&out);
        Ok(tag)
    }

    /// Constant-time verification of a tag. `Err(UnknownSource)` if the
    /// source has no key; `Ok(false)` if the tag does not match.
    pub fn verify_tag(&self, source_id: &str, payload: &[u8], tag: &[u8]) -> Result<bool> {
        let key = self
            .keys
            .get(source_id)
            .ok_or_else(|| Error::UnknownSource(source_id.to_string()))?;
        let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
        mac.update(payload);
        Ok(mac.verify_slice(tag).is_ok())
    }

    /// Parses a keyring file: one `source_id<TAB>hex_key` per line, blank
    /// lines and `#` comments allowed. A missing file is an empty keyring.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let text = std::fs::read_to_string(path)?;
        let mut keys = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (source, hex_key) = line.split_once('\t').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}:{}: keyring line has no tab separator",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if source.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: empty source id",
                    path.display(),
                    lineno + 1
                )));
            }
            let bytes = hex::decode(hex_key.trim()).map_err(|e| {
                Error::InvalidConfig(format!(
                    "{}:{}: bad hex key: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key: [u8; KEY_LEN] = bytes.try_into().map_err(|_| {
                Error::InvalidConfig(format!(
                    "{}:{}: key must be {KEY_LEN} bytes",
                    path.display(),
                    lineno + 1
                ))
            })?;
            keys.insert(source.to_string(), key);
        }
        Ok(Keyring { keys })
    }

    /// Writes the keyring sorted by source id (deterministic bytes for a
    /// given key set).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (source, key) in &self.keys {
            out.push_str(source);
            out.push('\t');
            out.push_str(&hex::encode(key));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}
