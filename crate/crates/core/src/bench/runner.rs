use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use super::generate::{generate_store_with_width, DEFAULT_PAYLOAD_WIDTH};
use super::stats::{decrease_pct, mean, round_half_up, sigma};
use super::{BenchError, Case};
use crate::client::{ClientController, ClientModel, TcpTransport, Transaction};
use crate::config::{ConfigError, KvConfig};
use crate::cost::{CostMeter, CostModel};
use crate::deployment::LocalDeployment;
use crate::server::{serve_controller, ServerController};
use crate::storage::{DataCache, DataStore, DEFAULT_CACHE_CAPACITY};
use crate::wire::{Query, Source, DEFAULT_MAX_FRAME};
use crate::Mode;

/// Table name used for generated stores.
pub const BENCH_TABLE: &str = "records";
const BENCH_TOKEN: &str = "bench";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub from: u64,
    pub to: u64,
    pub step: u64,
    pub modes: Vec<Mode>,
    pub cases: Vec<Case>,
    /// Disabled means wall-clock timing in milliseconds.
    pub cost_model: CostModel,
    pub seed: u64,
    pub outdir: PathBuf,
    /// Wall-clock repetitions per point; the minimum is reported.
    pub repeat: usize,
    pub cache_capacity: usize,
    pub payload_width: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            from: 1000,
            to: 30_000,
            step: 1000,
            modes: vec![Mode::Spim, Mode::Dmvc],
            cases: Case::ALL.to_vec(),
            cost_model: CostModel::default(),
            seed: 7,
            outdir: PathBuf::from("."),
            repeat: 3,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            payload_width: DEFAULT_PAYLOAD_WIDTH,
        }
    }
}

fn parse_list<T: std::str::FromStr<Err = String>>(kv: &KvConfig, key: &str, default: Vec<T>) -> Result<Vec<T>, ConfigError> {
    if kv.get(key).is_none() {
        return Ok(default);
    }
    kv.list(key)
        .iter()
        .map(|s| s.parse().map_err(|e: String| ConfigError::invalid(key, e)))
        .collect()
}

impl BenchConfig {
    pub const KEYS: &'static [&'static str] = &[
        "from",
        "to",
        "step",
        "modes",
        "cases",
        "cost_model",
        "scan_cost",
        "rtt_cost",
        "seed",
        "outdir",
        "repeat",
        "cache_capacity",
        "payload_width",
    ];

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        kv.reject_unknown(Self::KEYS)?;
        let d = Self::default();
        let mut cost_model = CostModel::new(
            kv.parse_or("scan_cost", d.cost_model.scan_cost_per_record)?,
            kv.parse_or("rtt_cost", d.cost_model.network_rtt_cost)?,
        );
        cost_model.enabled = kv.parse_flag_or("cost_model", true)?;
        let config = Self {
            from: kv.parse_or("from", d.from)?,
            to: kv.parse_or("to", d.to)?,
            step: kv.parse_or("step", d.step)?,
            modes: parse_list(kv, "modes", d.modes)?,
            cases: parse_list(kv, "cases", d.cases)?,
            cost_model,
            seed: kv.parse_or("seed", d.seed)?,
            outdir: kv.get("outdir").map(|p| kv.base_dir().join(p)).unwrap_or(d.outdir),
            repeat: kv.parse_or("repeat", d.repeat)?,
            cache_capacity: kv.parse_or("cache_capacity", d.cache_capacity)?,
            payload_width: kv.parse_or("payload_width", d.payload_width)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.from == 0 {
            return Err(ConfigError::invalid("from", "must be at least 1"));
        }
        if self.to < self.from {
            return Err(ConfigError::invalid("to", "must not be below from"));
        }
        if self.step == 0 {
            return Err(ConfigError::invalid("step", "must be at least 1"));
        }
        if self.modes.is_empty() {
            return Err(ConfigError::invalid("modes", "list is empty"));
        }
        if self.cases.is_empty() {
            return Err(ConfigError::invalid("cases", "list is empty"));
        }
        if self.repeat == 0 {
            return Err(ConfigError::invalid("repeat", "must be at least 1"));
        }
        if self.cache_capacity == 0 {
            return Err(ConfigError::invalid("cache_capacity", "must be at least 1"));
        }
        let cm = &self.cost_model;
        if !(cm.scan_cost_per_record >= 0.0 && cm.network_rtt_cost >= 0.0) {
            return Err(ConfigError::invalid("scan_cost", "costs must be non-negative"));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<u64> {
        (self.from..=self.to).step_by(self.step as usize).collect()
    }
}

/// One store size, ready to be measured in either mode and case.
pub struct CaseRunner {
    store: Arc<DataStore>,
    n: u64,
    cost_model: CostModel,
    cache_capacity: usize,
    repeat: usize,
}

impl CaseRunner {
    pub fn new(store: Arc<DataStore>, n: u64, cost_model: CostModel) -> Self {
        Self {
            store,
            n,
            cost_model,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            repeat: 1,
        }
    }

    /// Generates and loads a store of `n` records.
    pub fn generated(n: u64, seed: u64, payload_width: usize, cost_model: CostModel) -> Result<Self, BenchError> {
        let mut store = DataStore::new();
        store.load_csv(BENCH_TABLE, generate_store_with_width(n, seed, payload_width).as_bytes())?;
        Ok(Self::new(Arc::new(store), n, cost_model))
    }

    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.cache_capacity = capacity;
        self
    }

    pub fn with_repeat(mut self, repeat: usize) -> Self {
        self.repeat = repeat.max(1);
        self
    }

    pub fn query(&self) -> Query {
        Query::new(BENCH_TABLE, 1, self.n).expect("bench query is valid")
    }

    /// Abstract units when the cost model is enabled, otherwise the
    /// fastest of the wall-clock repeats in milliseconds.
    pub fn run(&self, case: Case, mode: Mode) -> Result<f64, BenchError> {
        if self.cost_model.enabled {
            let meter = Arc::new(CostMeter::new(self.cost_model));
            let mut dep = LocalDeployment::new(Arc::clone(&self.store), mode, self.cache_capacity, Some(Arc::clone(&meter)))?;
            measure_units(&mut dep, &meter, case, &self.query())
        } else {
            (0..self.repeat).try_fold(f64::INFINITY, |best, _| Ok(best.min(self.wall_clock_once(case, mode)?)))
        }
    }

    fn wall_clock_once(&self, case: Case, mode: Mode) -> Result<f64, BenchError> {
        let server = ServerController::new(Arc::clone(&self.store), [BENCH_TOKEN]).with_mode(mode, self.cache_capacity)?;
        let handle = serve_controller(Arc::new(server), "127.0.0.1:0", DEFAULT_MAX_FRAME)?;
        let mut model = ClientModel::new(DataCache::new(self.cache_capacity)?);
        if mode == Mode::Dmvc {
            model = model.with_replica(Arc::clone(&self.store));
        }
        let transport = TcpTransport::new(handle.local_addr().to_string());
        let mut cc = ClientController::new("bench", BENCH_TOKEN, model, transport);
        let q = self.query();

        // Open the connection with a request for an absent key so the timed
        // request does not pay for the handshake.
        let warm = Query::new(BENCH_TABLE, 0, 0).expect("valid");
        cc.cc_request(&warm)?;
        if case == Case::CacheFetch {
            expect_ok(&cc.cc_request(&q)?, Source::Store)?;
        }
        let start = Instant::now();
        let txn = cc.cc_request(&q)?;
        let elapsed = start.elapsed().as_secs_f64() * 1000.0;
        expect_ok(&txn, expected_source(case))?;
        handle.shutdown();
        Ok(elapsed)
    }
}

fn expected_source(case: Case) -> Source {
    match case {
        Case::CacheFetch => Source::Cache,
        Case::StoreFetch => Source::Store,
    }
}

fn expect_ok(txn: &Transaction, source: Source) -> Result<(), BenchError> {
    let r = &txn.response;
    if !r.is_ok() || r.source != source {
        return Err(BenchError::UnexpectedResponse(format!(
            "status {} source {} code {}, wanted OK from {source}",
            r.status, r.source, r.error_code
        )));
    }
    Ok(())
}

/// Measures one fetch on an existing deployment, in cost units. A
/// cache_fetch primes the cache first if needed; a store_fetch refuses to
/// run against a warm cache. The running total is cross-checked against
/// the event log.
pub fn measure_units(dep: &mut LocalDeployment, meter: &CostMeter, case: Case, q: &Query) -> Result<f64, BenchError> {
    let cached = dep.client().cache().contains(q);
    match case {
        Case::CacheFetch if !cached => expect_ok(&dep.request(q)?, Source::Store)?,
        Case::StoreFetch if cached => return Err(BenchError::WarmCache(q.cache_key())),
        _ => {}
    }
    meter.reset();
    let txn = dep.request(q)?;
    expect_ok(&txn, expected_source(case))?;
    let (total, event_sum) = (meter.total(), meter.event_sum());
    if (total - event_sum).abs() > 1e-9 * total.abs().max(1.0) {
        return Err(BenchError::CostMismatch { total, event_sum });
    }
    Ok(total)
}

/// Runs one point with a freshly generated store (seed 7, default width).
pub fn run_case(case: Case, mode: Mode, n: u64, cost_model: CostModel) -> Result<f64, BenchError> {
    CaseRunner::generated(n, BenchConfig::default().seed, DEFAULT_PAYLOAD_WIDTH, cost_model)?.run(case, mode)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub records: u64,
    /// dmvc time.
    pub t1: Option<f64>,
    /// SPIM time.
    pub t2: Option<f64>,
    pub decrease_pct: Option<f64>,
}

impl TimingRow {
    pub fn new(records: u64, t1: Option<f64>, t2: Option<f64>) -> Self {
        let decrease_pct = match (t1, t2) {
            (Some(a), Some(b)) => decrease_pct(a, b),
            _ => None,
        };
        Self {
            records,
            t1,
            t2,
            decrease_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub case: Case,
    pub rows: Vec<TimingRow>,
    pub average_decrease: Option<f64>,
    pub sigma_t1: Option<f64>,
    pub sigma_t2: Option<f64>,
}

impl BenchReport {
    pub fn from_rows(case: Case, rows: Vec<TimingRow>) -> Self {
        let decreases: Vec<f64> = rows.iter().filter_map(|r| r.decrease_pct).collect();
        let t1: Vec<f64> = rows.iter().filter_map(|r| r.t1).collect();
        let t2: Vec<f64> = rows.iter().filter_map(|r| r.t2).collect();
        Self {
            case,
            average_decrease: mean(&decreases).map(|m| round_half_up(m, 2)),
            sigma_t1: sigma(&t1),
            sigma_t2: sigma(&t2),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    /// True when times are cost units rather than milliseconds.
    pub deterministic: bool,
    pub reports: Vec<BenchReport>,
}

fn fmt_time(t: Option<f64>) -> String {
    match t {
        Some(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{x:.0}"),
        Some(x) => format!("{x:.3}"),
        None => String::new(),
    }
}

fn fmt_pct(p: Option<f64>) -> String {
    p.map(|p| format!("{p:.2}")).unwrap_or_default()
}

impl SuiteReport {
    pub fn report(&self, case: Case) -> Option<&BenchReport> {
        self.reports.iter().find(|r| r.case == case)
    }

    pub fn table1_csv(&self) -> String {
        let mut out = String::from("case,records,t1,t2,decrease_pct\n");
        for r in &self.reports {
            for row in &r.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.case,
                    row.records,
                    fmt_time(row.t1),
                    fmt_time(row.t2),
                    fmt_pct(row.decrease_pct)
                );
            }
            let _ = writeln!(out, "{},average,,,{}", r.case, fmt_pct(r.average_decrease));
        }
        out
    }

    pub fn table2_csv(&self) -> String {
        let mut out = String::from("case,arch,sigma\n");
        for r in &self.reports {
            for (arch, s) in [(Mode::Dmvc, r.sigma_t1), (Mode::Spim, r.sigma_t2)] {
                let _ = writeln!(out, "{},{},{}", r.case, arch, fmt_pct(s));
            }
        }
        out
    }

    /// Tab-separated columns: records, then one time series per case and
    /// architecture. Missing points are written as `?`.
    pub fn plotdata_tsv(&self) -> String {
        let unit = if self.deterministic { "units" } else { "ms" };
        let mut out = String::from("# records");
        for r in &self.reports {
            let _ = write!(out, "\t{}_dmvc_{unit}\t{}_spim_{unit}", r.case, r.case);
        }
        out.push('\n');
        let sizes: std::collections::BTreeSet<u64> =
            self.reports.iter().flat_map(|r| r.rows.iter().map(|row| row.records)).collect();
        for n in sizes {
            let _ = write!(out, "{n}");
            for r in &self.reports {
                let row = r.rows.iter().find(|row| row.records == n);
                for t in [row.and_then(|x| x.t1), row.and_then(|x| x.t2)] {
                    let cell = fmt_time(t);
                    let _ = write!(out, "\t{}", if cell.is_empty() { "?" } else { &cell });
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes table1.csv, table2.csv and plotdata.tsv into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| BenchError::Output { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for (name, body) in [
            ("table1.csv", self.table1_csv()),
            ("table2.csv", self.table2_csv()),
            ("plotdata.tsv", self.plotdata_tsv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs every configured case and mode over the size sweep. Stops at the
/// first failing point.
pub fn run_suite(config: &BenchConfig) -> Result<SuiteReport, BenchError> {
    config.validate()?;
    let mut rows: BTreeMap<Case, Vec<TimingRow>> = BTreeMap::new();
    for n in config.sizes() {
        let runner = CaseRunner::generated(n, config.seed, config.payload_width, config.cost_model)?
            .with_cache_capacity(config.cache_capacity)
            .with_repeat(config.repeat);
        for &case in &config.cases {
            let mut times: BTreeMap<Mode, f64> = BTreeMap::new();
            for &mode in &config.modes {
                let t = runner.run(case, mode).map_err(|e| BenchError::Run {
                    case,
                    mode,
                    n,
                    source: Box::new(e),
                })?;
                log::debug!("{case} {mode} n={n}: {t}");
                times.insert(mode, t);
            }
            rows.entry(case).or_default().push(TimingRow::new(
                n,
                times.get(&Mode::Dmvc).copied(),
                times.get(&Mode::Spim).copied(),
            ));
        }
    }
    Ok(SuiteReport {
        deterministic: config.cost_model.enabled,
        reports: rows.into_iter().map(|(case, rows)| BenchReport::from_rows(case, rows)).collect(),
    })
}
