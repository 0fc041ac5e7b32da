//! Benchmark harness: synthetic stores, the two fetch workloads run in
//! both modes, and the timing/statistics reports.

pub mod fixtures;
pub mod generate;
mod runner;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::client::ClientError;
use crate::config::ConfigError;
use crate::server::ServerError;
use crate::storage::StorageError;
use crate::Mode;

pub use fixtures::{verify_fixtures, Check};
pub use generate::{generate_store, write_store};
pub use runner::{
    measure_units, run_case, run_suite, BenchConfig, BenchReport, CaseRunner, SuiteReport, TimingRow, BENCH_TABLE,
};
pub use stats::{decrease_pct, mean, sigma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    /// The requested range is already in the client cache.
    CacheFetch,
    /// Cold cache; the data has to come from the store.
    StoreFetch,
}

impl Case {
    pub const ALL: [Case; 2] = [Case::CacheFetch, Case::StoreFetch];

    pub fn as_str(self) -> &'static str {
        match self {
            Case::CacheFetch => "cache_fetch",
            Case::StoreFetch => "store_fetch",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cache_fetch" => Ok(Case::CacheFetch),
            "store_fetch" => Ok(Case::StoreFetch),
            other => Err(format!("unknown case {other:?} (expected cache_fetch or store_fetch)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error("store_fetch needs a cold cache but {0} is already cached")]
    WarmCache(String),
    #[error("unexpected response: {0}")]
    UnexpectedResponse(String),
    #[error("cost total {total} disagrees with event log sum {event_sum}")]
    CostMismatch { total: f64, event_sum: f64 },
    #[error("{case} {mode} n={n}: {source}")]
    Run {
        case: Case,
        mode: Mode,
        n: u64,
        source: Box<BenchError>,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}
