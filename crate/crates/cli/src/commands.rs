use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Arc;

use spim_core::bench::{self, BenchConfig};
use spim_core::client::{ClientConfig, ClientController, ClientError, TcpTransport};
use spim_core::config::{ConfigError, KvConfig};
use spim_core::cost::{CostMeter, CostModel};
use spim_core::deployment::LocalDeployment;
use spim_core::server::{serve as start_server, ServerConfig};
use spim_core::storage::{DataStore, DEFAULT_CACHE_CAPACITY};
use spim_core::view::{compose, render, RenderKind};
use spim_core::wire::{Query, ResponseEnvelope};
use spim_core::Mode;

/// A runtime failure, already formatted for stderr.
pub struct Failure(String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn client_failure(e: ClientError) -> Failure {
    Failure(format!("{}: {e}", e.code()))
}

fn error_response(resp: &ResponseEnvelope) -> Failure {
    Failure(format!("{} (request {})", resp.error_code, resp.request_id))
}

type Outcome = Result<(), Failure>;

fn write_stdout(bytes: &[u8]) -> Outcome {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

pub fn serve(config: &Path) -> Outcome {
    let cfg = ServerConfig::from_kv(&KvConfig::load(config)?)?;
    let handle = start_server(&cfg)?;
    eprintln!("listening on {} (mode {})", handle.local_addr(), cfg.mode);

    let (tx, rx) = mpsc::channel();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })?;
    let _ = rx.recv();

    eprintln!("shutting down");
    let controller = Arc::clone(handle.controller());
    handle.shutdown();
    let c = controller.counters();
    eprintln!(
        "sc_requests={} sm_invocations={} ds_scans={} dc_reads_attempted_by_sm={} unauthorized={} malformed={}",
        c.sc_requests, c.sm_invocations, c.ds_scans, c.dc_reads_attempted_by_sm, c.unauthorized, c.malformed
    );
    if let Some(meter) = controller.meter() {
        eprintln!("cost_units={}", meter.total());
    }
    Ok(())
}

pub fn query(config: &Path, table: &str, from: u64, to: u64, kind: RenderKind, trace: bool) -> Outcome {
    let q = Query::new(table, from, to)?;
    let cfg = ClientConfig::from_kv(&KvConfig::load(config)?)?;
    let meter = cfg.cost_model.map(|m| Arc::new(CostMeter::new(m)));
    let transport = TcpTransport::new(&cfg.server_address);
    let mut cc = ClientController::open(&cfg, transport, meter.clone()).map_err(client_failure)?;
    let txn = cc.cc_request(&q).map_err(client_failure)?;
    if trace {
        eprint!("{}", txn.trace.to_lines());
    }
    if let Some(m) = meter {
        eprintln!("cost_units={}", m.total());
    }
    if !txn.response.is_ok() {
        return Err(error_response(&txn.response));
    }
    write_stdout(&render(&txn.response, kind)?)
}

struct Part {
    label: String,
    server: String,
    query: Query,
}

fn parse_part(label: &str, value: &str) -> Result<Part, ConfigError> {
    let key = format!("part.{label}");
    let fields: Vec<&str> = value.split(',').map(str::trim).collect();
    let [server, table, from, to] = fields[..] else {
        return Err(ConfigError::invalid(&key, "expected server,table,from,to"));
    };
    if label.is_empty() {
        return Err(ConfigError::invalid(&key, "label is empty"));
    }
    let bound = |s: &str| s.parse::<u64>().map_err(|e| ConfigError::invalid(&key, e));
    let query = Query::new(table, bound(from)?, bound(to)?).map_err(|e| ConfigError::invalid(&key, e))?;
    Ok(Part {
        label: label.to_owned(),
        server: server.to_owned(),
        query,
    })
}

pub fn mashup(config: &Path, render_override: Option<RenderKind>) -> Outcome {
    let kv = KvConfig::load(config)?;
    kv.reject_unknown_except_prefix(&["client_id", "token", "render", "cache_capacity"], Some("part."))?;
    let parts = kv
        .with_prefix("part.")
        .map(|(label, value)| parse_part(label, value))
        .collect::<Result<Vec<_>, _>>()?;
    if parts.is_empty() {
        return Err(Failure("mashup config lists no part.<label> entries".into()));
    }
    let kind = match render_override {
        Some(k) => k,
        None => kv.parse_or("render", RenderKind::Text)?,
    };
    let base = ClientConfig {
        client_id: kv.get("client_id").unwrap_or("mashup").to_owned(),
        token: kv.get("token").unwrap_or_default().to_owned(),
        cache_capacity: kv.parse_or("cache_capacity", DEFAULT_CACHE_CAPACITY)?,
        ..ClientConfig::default()
    };

    // One client per distinct server, so repeated ranges hit its cache.
    let mut clients: HashMap<String, ClientController<TcpTransport>> = HashMap::new();
    let mut fetched = Vec::with_capacity(parts.len());
    for part in parts {
        let cc = match clients.get_mut(&part.server) {
            Some(cc) => cc,
            None => {
                let cfg = ClientConfig {
                    server_address: part.server.clone(),
                    ..base.clone()
                };
                let cc = ClientController::open(&cfg, TcpTransport::new(&part.server), None).map_err(client_failure)?;
                clients.entry(part.server.clone()).or_insert(cc)
            }
        };
        let txn = cc
            .cc_request(&part.query)
            .map_err(|e| Failure(format!("part {}: {}", part.label, client_failure(e))))?;
        fetched.push((part.label, txn.response));
    }
    let merged = compose(&fetched)?;
    write_stdout(&render(&merged, kind)?)
}

pub fn bench(config: Option<&Path>, out: Option<PathBuf>) -> Outcome {
    let mut cfg = match config {
        Some(path) => BenchConfig::from_kv(&KvConfig::load(path)?)?,
        None => BenchConfig::default(),
    };
    if let Some(dir) = out {
        cfg.outdir = dir;
    }
    let unit = if cfg.cost_model.enabled { "cost units" } else { "ms" };
    eprintln!(
        "bench: n={}..{} step {}, modes {:?}, {unit}",
        cfg.from, cfg.to, cfg.step, cfg.modes
    );
    let report = bench::run_suite(&cfg)?;
    for r in &report.reports {
        eprintln!(
            "{}: average decrease {}",
            r.case,
            r.average_decrease.map(|a| format!("{a:.2}%")).unwrap_or_else(|| "n/a".into())
        );
    }
    let written = report.write_to(&cfg.outdir)?;
    let listing: String = written.iter().map(|p| format!("{}\n", p.display())).collect();
    write_stdout(listing.as_bytes())
}

pub fn stats(config: &Path, table: &str, from: u64, to: u64, repeat: u32) -> Outcome {
    let q = Query::new(table, from, to)?;
    let kv = KvConfig::load(config)?;
    let paths = kv.list("store");
    if paths.is_empty() {
        return Err(Failure(ConfigError::invalid("store", "no data store files listed").to_string()));
    }
    let mut store = DataStore::new();
    for p in &paths {
        store.load_csv_file(&kv.base_dir().join(p))?;
    }
    let mode: Mode = kv.parse_or("mode", Mode::Spim)?;
    let capacity = kv.parse_or("cache_capacity", DEFAULT_CACHE_CAPACITY)?;
    let model = CostModel::new(kv.parse_or("scan_cost", 1.0)?, kv.parse_or("rtt_cost", 0.0)?);
    let meter = Arc::new(CostMeter::new(model));
    let mut dep = LocalDeployment::new(Arc::new(store), mode, capacity, Some(Arc::clone(&meter)))?;

    let (mut ok, mut failed) = (0u32, 0u32);
    for _ in 0..repeat {
        let txn = dep.request(&q).map_err(client_failure)?;
        if txn.response.is_ok() {
            ok += 1;
        } else {
            failed += 1;
        }
    }
    let c = dep.counters();
    let s = dep.server().counters();
    let cache = dep.client().cache();
    let lines = [
        ("mode", mode.to_string()),
        ("requests", repeat.to_string()),
        ("ok", ok.to_string()),
        ("failed", failed.to_string()),
        ("cache_hits", cache.hits().to_string()),
        ("cache_misses", cache.misses().to_string()),
        ("cm_cache_scans", c.cm_cache_scans.to_string()),
        ("cm_ds_scans", c.cm_ds_scans.to_string()),
        ("sm_cache_scans", c.sm_cache_scans.to_string()),
        ("sm_ds_scans", c.sm_ds_scans.to_string()),
        ("sync_messages", c.sync_messages.to_string()),
        ("sc_requests", s.sc_requests.to_string()),
        ("sm_invocations", s.sm_invocations.to_string()),
        ("cost_units", meter.total().to_string()),
    ];
    let text: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_stdout(text.as_bytes())
}

pub fn verify_fixtures() -> Outcome {
    let checks = bench::verify_fixtures();
    let text: String = checks.iter().map(|c| c.line() + "\n").collect();
    if checks.iter().all(|c| c.passed) {
        write_stdout(text.as_bytes())
    } else {
        eprint!("{text}");
        let failed = checks.iter().filter(|c| !c.passed).count();
        Err(Failure(format!("{failed} of {} fixture checks failed", checks.len())))
    }
}
