//! Runtime configuration: defaults, a flat key=value file format, and the
//! derived on-disk layout of a data directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::read_gate::DecayConfig;
use crate::reconciler::{ReconcileConfig, ReconcileMode, StateMetric};

/// How writes are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateMode {
    /// No admission control (the ungoverned baseline).
    Off,
    /// Validate, record, and apply before acknowledging.
    #[default]
    Sync,
    /// Acknowledge immediately; a worker validates and applies in order.
    Async,
}

impl GateMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(GateMode::Off),
            "sync" => Ok(GateMode::Sync),
            "async" => Ok(GateMode::Async),
            other => Err(Error::InvalidConfig(format!(
                "gate.mode must be off, sync, or async, got `{other}`"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateMode::Off => "off",
            GateMode::Sync => "sync",
            GateMode::Async => "async",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub data_dir: Option<PathBuf>,
    pub embedding_dim: usize,
    /// Candidate pool size for retrieval when the request doesn't say.
    pub retrieve_k: usize,
    pub decay: DecayConfig,
    pub reconcile: ReconcileConfig,
    pub gate_mode: GateMode,
    /// Attributes the contradiction oracle treats as multi-valued.
    pub multi_valued_attributes: BTreeSet<String>,
    /// Require a valid request MAC from every non-system principal.
    pub require_mac: bool,
    /// Override for the policy file (default: `<data_dir>/policy.tsv`).
    pub policy_path: Option<PathBuf>,
    /// Override for the keyring file (default: `<data_dir>/keyring.tsv`).
    pub keyring_path: Option<PathBuf>,
    /// fsync the ledger on every append instead of only flushing.
    pub fsync: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: None,
            embedding_dim: crate::embedding::DEFAULT_DIM,
            retrieve_k: 10,
            decay: DecayConfig::default(),
            reconcile: ReconcileConfig::default(),
            gate_mode: GateMode::default(),
            multi_valued_attributes: BTreeSet::new(),
            require_mac: false,
            policy_path: None,
            keyring_path: None,
            fsync: false,
        }
    }
}

/// Where everything lives inside a data directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorePaths {
    pub data_dir: PathBuf,
    pub ledger: PathBuf,
    pub keyring: PathBuf,
    pub policy: PathBuf,
    pub snapshot: PathBuf,
    pub reconcile_csv: PathBuf,
}

impl Config {
    /// Loads a config file: one `key=value` per line, `#` comments and
    /// blank lines ignored, unknown keys rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            cfg.apply_kv(key.trim(), value.trim()).map_err(|e| {
                Error::InvalidConfig(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override. Shared by the file loader and the
    /// command line.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::InvalidConfig(format!("{key}: cannot parse `{value}`"))
            })
        }
        match key {
            "embedding.dim" => self.embedding_dim = num(key, value)?,
            "retrieve.k" => self.retrieve_k = num(key, value)?,
            "decay.eta" => self.decay.eta = num(key, value)?,
            "decay.kappa" => self.decay.kappa = num(key, value)?,
            "decay.theta_fresh" => self.decay.theta_fresh = num(key, value)?,
            "reconcile.period_n" => self.reconcile.period_n = num(key, value)?,
            "reconcile.drift_threshold" => self.reconcile.drift_threshold = num(key, value)?,
            "reconcile.mode" => {
                self.reconcile.mode = match value {
                    "full_rebuild" => ReconcileMode::FullRebuild,
                    "per_unit" => ReconcileMode::PerUnitCorrect,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "reconcile.mode must be full_rebuild or per_unit, got `{other}`"
                        )))
                    }
                }
            }
            "reconcile.metric" => {
                self.reconcile.metric = match value {
                    "concat_text" => StateMetric::ConcatText,
                    "mean_embedding" => StateMetric::MeanEmbedding,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "reconcile.metric must be concat_text or mean_embedding, got `{other}`"
                        )))
                    }
                }
            }
            "gate.mode" => self.gate_mode = GateMode::parse(value)?,
            "gate.multi_valued" => {
                self.multi_valued_attributes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "gate.require_mac" => self.require_mac = bool_kv(key, value)?,
            "ledger.fsync" => self.fsync = bool_kv(key, value)?,
            "paths.data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "paths.policy" => self.policy_path = Some(PathBuf::from(value)),
            "paths.keyring" => self.keyring_path = Some(PathBuf::from(value)),
            other => {
                return Err(Error::InvalidConfig(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    /// Re-checks every constraint (the field types allow invalid values to
    /// be assembled directly).
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim < crate::embedding::MIN_DIM {
            return Err(Error::InvalidConfig(format!(
                "embedding.dim must be at least {}, got {}",
                crate::embedding::MIN_DIM,
                self.embedding_dim
            )));
        }
        if self.retrieve_k == 0 {
            return Err(Error::InvalidConfig("retrieve.k must be at least 1".into()));
        }
        DecayConfig::new(self.decay.eta, self.decay.kappa, self.decay.theta_fresh)?;
        ReconcileConfig::new(
            self.reconcile.period_n,
            self.reconcile.drift_threshold,
            self.reconcile.mode,
            self.reconcile.metric,
        )?;
        Ok(())
    }

    /// Resolves the on-disk layout for `data_dir`, honouring the policy and
    /// keyring overrides.
    pub fn paths(&self, data_dir: &Path) -> StorePaths {
        StorePaths {
            data_dir: data_dir.to_path_buf(),
            ledger: data_dir.join("ledger.jsonl"),
            keyring: self
                .keyring_path
                .clone()
                .unwrap_or_else(|| data_dir.join("keyring.tsv")),
            policy: self
                .policy_path
                .clone()
                .unwrap_or_else(|| data_dir.join("policy.tsv")),
            snapshot: data_dir.join("snapshot.jsonl"),
            reconcile_csv: data_dir.join("reconcile.csv"),
        }
    }
}

fn bool_kv(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::InvalidConfig(format!(
            "{key}: expected true or false, got `{other}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn file_roundtrip_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ssgm.conf");
        std::fs::write(
            &path,
            "# staging tuning\n\
             decay.eta=25\n\
             decay.kappa=1.5\n\
             reconcile.period_n=5\n\
             reconcile.mode=per_unit\n\
             reconcile.metric=mean_embedding\n\
             gate.mode=async\n\
             gate.multi_valued=hobby, alias\n\
             ledger.fsync=true\n\
             retrieve.k=3\n",
        )
        .unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.decay.eta, 25.0);
        assert_eq!(cfg.decay.kappa, 1.5);
        assert_eq!(cfg.reconcile.period_n, 5);
        assert_eq!(cfg.reconcile.mode, ReconcileMode::PerUnitCorrect);
        assert_eq!(cfg.reconcile.metric, StateMetric::MeanEmbedding);
        assert_eq!(cfg.gate_mode, GateMode::Async);
        assert!(cfg.multi_valued_attributes.contains("hobby"));
        assert!(cfg.multi_valued_attributes.contains("alias"));
        assert!(cfg.fsync);
        assert_eq!(cfg.retrieve_k, 3);
        // Untouched keys keep their defaults.
        assert_eq!(cfg.decay.theta_fresh, 0.01);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ssgm.conf");
        std::fs::write(&path, "decay.eta=10\nnot.a.key=1\n").unwrap();
        let err = Config::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "{msg}");
        assert!(msg.contains("not.a.key"), "{msg}");

        std::fs::write(&path, "decay.eta=fast\n").unwrap();
        assert!(Config::load(&path).is_err());
        std::fs::write(&path, "decay.eta\n").unwrap();
        assert!(Config::load(&path).is_err());
        // Values that parse but violate constraints fail validation.
        std::fs::write(&path, "decay.eta=-4\n").unwrap();
        assert!(Config::load(&path).is_err());
        std::fs::write(&path, "embedding.dim=2\n").unwrap();
        assert!(Config::load(&path).is_err());
    }

    #[test]
    fn paths_honour_overrides() {
        let mut cfg = Config::default();
        let paths = cfg.paths(Path::new("/tmp/mem"));
        assert_eq!(paths.ledger, Path::new("/tmp/mem/ledger.jsonl"));
        assert_eq!(paths.keyring, Path::new("/tmp/mem/keyring.tsv"));
        cfg.keyring_path = Some(PathBuf::from("/etc/ssgm/keys.tsv"));
        let paths = cfg.paths(Path::new("/tmp/mem"));
        assert_eq!(paths.keyring, Path::new("/etc/ssgm/keys.tsv"));
        assert_eq!(paths.policy, Path::new("/tmp/mem/policy.tsv"));
    }

    #[test]
    fn gate_mode_names_roundtrip() {
        for mode in [GateMode::Off, GateMode::Sync, GateMode::Async] {
            assert_eq!(GateMode::parse(mode.name()).unwrap(), mode);
        }
        assert!(GateMode::parse("turbo").is_err());
    }
}
