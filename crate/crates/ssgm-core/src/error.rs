//! Crate-wide error taxonomy.
//!
//! Operations return the narrow subset that can actually occur; the variants
//! map one-to-one onto the failure modes callers are expected to branch on
//! (and onto C ABI status codes in the companion FFI crate).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A principal tried to write (or an entry claims a source) without a
    /// registered provenance key.
    #[error("unknown source `{0}`: no provenance key registered")]
    UnknownSource(String),

    /// Underlying file I/O failed.
    #[error("storage failure: {0}")]
    StorageFailure(#[source] std::io::Error),

    /// A ledger replay range fell outside `[0, last_seq]` or was reversed.
    #[error("replay range {from}..={to} out of bounds (last seq {last:?})")]
    RangeOutOfBounds {
        from: u64,
        to: u64,
        last: Option<u64>,
    },

    /// A unit's origin list is empty or references a ledger seq that does not
    /// exist.
    #[error("invalid origin: {0}")]
    InvalidOrigin(String),

    /// No live unit with this idx.
    #[error("unknown unit idx {0}")]
    UnknownIdx(u64),

    /// The pluggable contradiction oracle raised instead of deciding.
    #[error("contradiction oracle failed: {0}")]
    OracleFailure(String),

    /// The ledger failed verification; governed operations refuse to run on
    /// top of a broken chain.
    #[error("ledger chain invalid at seq {first_bad_seq}: {detail}")]
    ChainInvalid { first_bad_seq: u64, detail: String },

    /// A configuration value (file, flag, or constructor argument) is out of
    /// range or unparseable.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A protocol request line could not be understood.
    #[error("malformed request: {0}")]
    MalformedRequest(String),

    /// The gateway could not bind its listen address.
    #[error("bind failure on {addr}: {source}")]
    BindFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::StorageFailure(e)
    }
}
