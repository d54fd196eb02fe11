//! Operator CLI: run the gateway, inspect the ledger, trigger
//! reconciliation, and drive the experiments.
//!
//! Exit codes: 0 success, 1 operational failure (invalid chain, bind
//! failure, storage fault), 2 usage or configuration error.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand, ValueEnum};

use ssgm_core::config::Config;
use ssgm_core::error::Error;
use ssgm_core::gateway::{serve, Engine, Request};
use ssgm_core::keyring::Keyring;
use ssgm_core::ledger::verify_file;
use ssgm_core::sim::drift::{self, Arm, DriftConfig};
use ssgm_core::sim::latency::{self, LatencyConfig};
use ssgm_core::sim::leakage::{self, LeakageConfig};

#[derive(Parser)]
#[command(
    name = "ssgm",
    version,
    about = "Governed agent memory: ledger-backed store with write/read gates"
)]
struct Cli {
    /// Flat key=value config file (see README for keys).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Data directory; overrides the config file and SSGM_DATA_DIR.
    #[arg(long, global = true, value_name = "PATH")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the TCP gateway until SIGINT/SIGTERM.
    Serve {
        /// Address to listen on.
        #[arg(long, default_value = "127.0.0.1:7444")]
        listen: String,
    },
    /// Check the ledger hash chain and provenance tags. Exit 0 iff valid.
    Verify,
    /// One reconciliation pass; prints the report and refreshes the snapshot.
    Reconcile,
    /// One-off retrieval as a given identity.
    Query {
        #[arg(long, default_value = "operator")]
        principal: String,
        /// Identity claim `attr=value`; repeatable.
        #[arg(long = "attr", value_name = "ATTR=VALUE")]
        attrs: Vec<String>,
        /// Candidate pool size (default: the configured retrieve.k).
        #[arg(long)]
        k: Option<usize>,
        query: String,
    },
    /// Create and persist a signing key for a new source.
    RegisterSource {
        source_id: String,
    },
    /// Run an experiment and write its CSV.
    #[command(subcommand)]
    Simulate(SimCmd),
    /// Summarize experiment CSVs as text tables.
    Report {
        /// CSV file; repeatable.
        #[arg(long = "csv", value_name = "PATH", required = true)]
        csv: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    On,
    Off,
    Both,
}

#[derive(Subcommand)]
enum SimCmd {
    /// Naive vs governed drift under a lossy rewriter.
    Drift {
        #[arg(long, default_value_t = 200)]
        steps: u64,
        /// Reconcile period of the governed arm.
        #[arg(long, default_value_t = 20)]
        window: u64,
        /// Per-token corruption probability per step.
        #[arg(long, default_value_t = 0.02)]
        epsilon: f64,
        /// Number of independent seeded runs per arm.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 42)]
        seed_base: u64,
        /// Facts in the corpus.
        #[arg(long, default_value_t = 24)]
        corpus: usize,
        #[arg(long, default_value = "drift.csv")]
        out: PathBuf,
    },
    /// Cross-tenant retrieval with the read gate on vs bypassed.
    Leakage {
        #[arg(long, default_value_t = 4)]
        tenants: usize,
        #[arg(long = "secrets", default_value_t = 25)]
        secrets_per_tenant: usize,
        #[arg(long, default_value_t = 10_000)]
        queries: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Both)]
        policy: PolicyArg,
        #[arg(long, default_value = "leakage.csv")]
        out: PathBuf,
    },
    /// Foreground write latency under gate modes off/sync/async.
    Latency {
        #[arg(long, default_value_t = 5_000)]
        writes: usize,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        /// Scratch directory for the per-mode ledgers (default: a fresh
        /// directory under the system temp dir, removed afterwards).
        #[arg(long)]
        work_dir: Option<PathBuf>,
        #[arg(long, default_value = "latency.csv")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ssgm: {e}");
            match e {
                Error::InvalidConfig(_) | Error::MalformedRequest(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Error> {
    match &cli.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default()),
    }
}

/// Flag beats config file beats SSGM_DATA_DIR beats the per-user default.
fn resolve_data_dir(cli: &Cli, cfg: &Config) -> PathBuf {
    cli.data_dir
        .clone()
        .or_else(|| cfg.data_dir.clone())
        .or_else(|| std::env::var_os("SSGM_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(default_data_dir)
}

fn default_data_dir() -> PathBuf {
    std::env::var_os("XDG_DATA_HOME")
        .map(PathBuf::from)
        .or_else(|| {
            std::env::var_os("HOME").map(|home| PathBuf::from(home).join(".local/share"))
        })
        .map(|base| base.join("ssgm"))
        .unwrap_or_else(|| PathBuf::from("ssgm-data"))
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = load_config(&cli)?;
    let data_dir = resolve_data_dir(&cli, &cfg);
    match &cli.cmd {
        Cmd::Serve { listen } => cmd_serve(&data_dir, cfg, listen),
        Cmd::Verify => cmd_verify(&data_dir, &cfg),
        Cmd::Reconcile => cmd_reconcile(&data_dir, cfg),
        Cmd::Query {
            principal,
            attrs,
            k,
            query,
        } => cmd_query(&data_dir, cfg, principal, attrs, *k, query),
        Cmd::RegisterSource { source_id } => cmd_register_source(&data_dir, cfg, source_id),
        Cmd::Simulate(sim) => cmd_simulate(sim),
        Cmd::Report { csv } => cmd_report(csv),
    }
}

// ---------------------------------------------------------------------------
// serve / verify / reconcile / query
// ---------------------------------------------------------------------------

fn cmd_serve(data_dir: &Path, cfg: Config, listen: &str) -> Result<(), Error> {
    let engine = Engine::open(data_dir, cfg)?;
    let listener = TcpListener::bind(listen).map_err(|source| Error::BindFailure {
        addr: listen.to_string(),
        source,
    })?;
    let shutdown = Arc::new(AtomicBool::new(false));
    signal_hook::flag::register(signal_hook::consts::SIGINT, Arc::clone(&shutdown))?;
    signal_hook::flag::register(signal_hook::consts::SIGTERM, Arc::clone(&shutdown))?;
    let local = listener.local_addr().map_err(|source| Error::BindFailure {
        addr: listen.to_string(),
        source,
    })?;
    // The resolved address, not the requested one — with port 0 the kernel
    // picks, and whoever started us needs to know what it picked.
    eprintln!("ssgm: listening on {local}, data dir {}", data_dir.display());
    serve(Arc::new(Mutex::new(engine)), listener, shutdown)?;
    eprintln!("ssgm: shut down cleanly");
    Ok(())
}

fn cmd_verify(data_dir: &Path, cfg: &Config) -> Result<(), Error> {
    let paths = cfg.paths(data_dir);
    if !paths.ledger.exists() {
        println!("chain valid: 0 entries (no ledger at {})", paths.ledger.display());
        return Ok(());
    }
    // With no keyring on disk there is nothing to check tags against;
    // fall back to structural verification rather than failing every tag.
    let keyring = Keyring::load(&paths.keyring)?;
    let report = verify_file(
        &paths.ledger,
        if keyring.is_empty() { None } else { Some(&keyring) },
    )?;
    if report.valid {
        println!(
            "chain valid: {} entries, provenance tags {}",
            report.entries_checked,
            if keyring.is_empty() { "not checked (empty keyring)" } else { "checked" }
        );
        Ok(())
    } else {
        Err(Error::ChainInvalid {
            first_bad_seq: report.first_bad_seq.unwrap_or(0),
            detail: report
                .detail
                .unwrap_or_else(|| "chain verification failed".into()),
        })
    }
}

fn cmd_reconcile(data_dir: &Path, cfg: Config) -> Result<(), Error> {
    let mut engine = Engine::open(data_dir, cfg)?;
    let report = engine.reconcile_now()?;
    engine.export_snapshot()?;
    println!(
        "reconciled at turn {}: {} units checked, {} corrected, drift {} -> {}",
        report.step,
        report.units_checked,
        report.units_corrected,
        report.pre_drift,
        report.post_drift
    );
    Ok(())
}

fn cmd_query(
    data_dir: &Path,
    cfg: Config,
    principal: &str,
    attrs: &[String],
    k: Option<usize>,
    query: &str,
) -> Result<(), Error> {
    let mut engine = Engine::open(data_dir, cfg)?;
    let mut req = Request::new(principal, "retrieve");
    req.attrs = attrs.to_vec();
    req.query = Some(query.to_string());
    req.k = k;
    let resp = engine.handle(&req);
    println!("{}", serde_json::to_string(&resp).expect("response serializes"));
    if resp.status == "error" {
        return Err(Error::MalformedRequest(
            resp.error.unwrap_or_else(|| "request failed".into()),
        ));
    }
    Ok(())
}

fn cmd_register_source(data_dir: &Path, cfg: Config, source_id: &str) -> Result<(), Error> {
    let mut engine = Engine::open(data_dir, cfg)?;
    if engine.keyring().contains(source_id) {
        println!(
            "source `{source_id}` already registered in {}",
            engine.paths().keyring.display()
        );
        return Ok(());
    }
    engine.register_source(source_id)?;
    println!(
        "registered `{source_id}`; key stored in {}",
        engine.paths().keyring.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(sim: &SimCmd) -> Result<(), Error> {
    match sim {
        SimCmd::Drift {
            steps,
            window,
            epsilon,
            seeds,
            seed_base,
            corpus,
            out,
        } => {
            if *window == 0 || *steps == 0 || *seeds == 0 || *corpus == 0 {
                return Err(Error::InvalidConfig(
                    "steps, window, seeds, and corpus must be positive".into(),
                ));
            }
            if !(0.0..=1.0).contains(epsilon) {
                return Err(Error::InvalidConfig(format!(
                    "epsilon must lie in [0, 1], got {epsilon}"
                )));
            }
            let cfg = DriftConfig {
                total_steps: *steps,
                window: *window,
                epsilon: *epsilon,
                seeds: (0..*seeds).map(|i| seed_base + i).collect(),
                corpus_size: *corpus,
            };
            let runs = drift::run_drift_all(&cfg);
            drift::write_csv(&runs, out)?;
            println!(
                "wrote {} rows to {}",
                runs.len() * (*steps as usize + 1),
                out.display()
            );
            for arm in [Arm::Naive, Arm::Governed] {
                let finals: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.arm == arm)
                    .map(|r| r.final_delta())
                    .collect();
                let maxes = runs
                    .iter()
                    .filter(|r| r.arm == arm)
                    .map(|r| r.max_delta())
                    .fold(0.0, f64::max);
                println!(
                    "  {:<8}  mean final drift {:.4}  max drift {:.4}",
                    arm.name(),
                    mean(&finals),
                    maxes
                );
            }
            Ok(())
        }
        SimCmd::Leakage {
            tenants,
            secrets_per_tenant,
            queries,
            k,
            seed,
            policy,
            out,
        } => {
            if *tenants < 2 {
                return Err(Error::InvalidConfig(
                    "leakage needs at least two tenants".into(),
                ));
            }
            if *secrets_per_tenant == 0 || *queries == 0 || *k == 0 {
                return Err(Error::InvalidConfig(
                    "secrets, queries, and k must be positive".into(),
                ));
            }
            let cfg = LeakageConfig {
                tenants: *tenants,
                secrets_per_tenant: *secrets_per_tenant,
                queries: *queries,
                k: *k,
                seed: *seed,
            };
            let outcomes = match policy {
                PolicyArg::Both => leakage::run_leakage_both(&cfg),
                PolicyArg::On => vec![leakage::run_leakage(&cfg, true)],
                PolicyArg::Off => vec![leakage::run_leakage(&cfg, false)],
            };
            leakage::write_csv(&outcomes, out)?;
            println!("wrote {} rows to {}", outcomes.len(), out.display());
            for o in &outcomes {
                println!(
                    "  policy {:<3}  {} leaks / {} queries  rate {}",
                    if o.policy_on { "on" } else { "off" },
                    o.leaks,
                    o.queries,
                    o.leakage_rate
                );
            }
            Ok(())
        }
        SimCmd::Latency {
            writes,
            seed,
            work_dir,
            out,
        } => {
            if *writes == 0 {
                return Err(Error::InvalidConfig("writes must be positive".into()));
            }
            let cfg = LatencyConfig {
                writes: *writes,
                seed: *seed,
                ..LatencyConfig::default()
            };
            let (dir, cleanup) = match work_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    (dir.clone(), false)
                }
                None => {
                    let dir = std::env::temp_dir()
                        .join(format!("ssgm-latency-{}", std::process::id()));
                    std::fs::create_dir_all(&dir)?;
                    (dir, true)
                }
            };
            let result = latency::run_latency(&cfg, &dir);
            if cleanup {
                let _ = std::fs::remove_dir_all(&dir);
            }
            let outcomes = result?;
            latency::write_csv(&outcomes, out)?;
            println!("wrote {} rows to {}", outcomes.len(), out.display());
            for o in &outcomes {
                println!(
                    "  {:<5}  p50 {:>8.2}us  p95 {:>8.2}us  mean {:>8.2}us  drift {}  admitted {}  rejected {}",
                    o.mode.name(),
                    o.p50_us,
                    o.p95_us,
                    o.mean_us,
                    o.final_delta,
                    o.admitted,
                    o.rejected
                );
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

const DRIFT_HEADER: &str = "step,seed,mode,delta";

fn cmd_report(paths: &[PathBuf]) -> Result<(), Error> {
    for path in paths {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let Some(header) = lines.next() else {
            println!("== {} — empty file", path.display());
            continue;
        };
        let rows: Vec<Vec<String>> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        println!("== {} ({} rows)", path.display(), rows.len());
        if header == DRIFT_HEADER {
            report_drift(&rows);
        } else if rows.len() <= 24 {
            print_table(header, &rows);
        } else {
            println!("  columns: {header}");
        }
        println!();
    }
    Ok(())
}

/// Per-mode digest of a drift CSV: runs, mean drift at the last step, and
/// the worst drift seen anywhere.
fn report_drift(rows: &[Vec<String>]) {
    for mode in ["naive", "governed"] {
        let mut finals: std::collections::BTreeMap<&str, f64> = Default::default();
        let mut worst = 0.0f64;
        for row in rows {
            if row.len() != 4 || row[2] != mode {
                continue;
            }
            let delta: f64 = row[3].parse().unwrap_or(f64::NAN);
            // Steps are ascending within a run, so the last row per seed wins.
            finals.insert(&row[1], delta);
            worst = worst.max(delta);
        }
        if finals.is_empty() {
            continue;
        }
        let mean_final = finals.values().sum::<f64>() / finals.len() as f64;
        println!(
            "  {:<8}  runs {:>3}  mean final drift {:.4}  max drift {:.4}",
            mode,
            finals.len(),
            mean_final,
            worst
        );
    }
}

fn print_table(header: &str, rows: &[Vec<String>]) {
    let headers: Vec<&str> = header.split(',').collect();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            } else {
                widths.push(cell.len());
            }
        }
    }
    let render = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths.get(i).copied().unwrap_or(0)))
            .collect();
        println!("  {}", padded.join("  "));
    };
    render(&headers.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for row in rows {
        render(row);
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
