//! Client tier: the client controller (entry point for views), the client
//! model (owner of the data cache) and the transports that reach a server.

mod controller;
mod model;
mod trace;
mod transport;

use std::path::PathBuf;

use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::cost::CostModel;
use crate::storage::{DataStore, StorageError, DEFAULT_CACHE_CAPACITY};
use crate::wire::WireError;
use crate::Mode;

pub use controller::{ClientController, Transaction};
pub use model::{ClientCounters, ClientModel};
pub use trace::{Outcome, Step, StepTrace, HIT_SEQUENCE, MISS_SERVED_SEQUENCE};
pub use transport::{InProcessTransport, TcpTransport, Transport};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection failed: {0}")]
    ConnectionFailed(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("cache file {0} is locked by another client")]
    CacheLocked(PathBuf),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl ClientError {
    /// Short machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            ClientError::ConnectionFailed(_) => "CONNECTION_FAILED",
            ClientError::Wire(WireError::Truncated { .. }) => "TRUNCATED",
            ClientError::Wire(WireError::Oversize { .. }) => "OVERSIZE",
            ClientError::Wire(WireError::Malformed(_)) => "MALFORMED",
            ClientError::Wire(WireError::Io(_)) => "CONNECTION_FAILED",
            ClientError::Storage(StorageError::MalformedCacheFile { .. }) => "MALFORMED_CACHE_FILE",
            ClientError::Storage(_) => "STORAGE_ERROR",
            ClientError::CacheLocked(_) => "CACHE_LOCKED",
            ClientError::Config(_) => "CONFIG_ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub server_address: String,
    pub client_id: String,
    pub token: String,
    pub cache_path: Option<PathBuf>,
    pub cache_capacity: usize,
    pub mode: Mode,
    /// Store copy searched by the duplicated client model (dmvc mode only).
    pub replica_store_paths: Vec<PathBuf>,
    pub cost_model: Option<CostModel>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            server_address: "127.0.0.1:7878".into(),
            client_id: "client".into(),
            token: String::new(),
            cache_path: None,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            mode: Mode::Spim,
            replica_store_paths: Vec::new(),
            cost_model: None,
        }
    }
}

impl ClientConfig {
    pub const KEYS: &'static [&'static str] = &[
        "server",
        "client_id",
        "token",
        "cache",
        "cache_capacity",
        "mode",
        "replica_store",
        "cost_model",
        "scan_cost",
        "rtt_cost",
    ];

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        kv.reject_unknown(Self::KEYS)?;
        Self::from_kv_lenient(kv)
    }

    /// Like [`from_kv`](Self::from_kv) but ignores keys it does not know.
    pub fn from_kv_lenient(kv: &KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let base = kv.base_dir();
        let cost_model = if kv.parse_flag_or("cost_model", false)? {
            Some(CostModel::new(kv.parse_or("scan_cost", 1.0)?, kv.parse_or("rtt_cost", 0.0)?))
        } else {
            None
        };
        let config = Self {
            server_address: kv.get("server").unwrap_or(&d.server_address).to_owned(),
            client_id: kv.get("client_id").unwrap_or(&d.client_id).to_owned(),
            token: kv.get("token").unwrap_or_default().to_owned(),
            cache_path: kv.get("cache").filter(|p| !p.is_empty()).map(|p| base.join(p)),
            cache_capacity: kv.parse_or("cache_capacity", d.cache_capacity)?,
            mode: kv.parse_or("mode", d.mode)?,
            replica_store_paths: kv.list("replica_store").into_iter().map(|p| base.join(p)).collect(),
            cost_model,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cache_capacity == 0 {
            return Err(ConfigError::invalid("cache_capacity", "must be at least 1"));
        }
        if self.mode == Mode::Dmvc && self.replica_store_paths.is_empty() {
            return Err(ConfigError::invalid("replica_store", "dmvc mode needs a store replica for the client model"));
        }
        Ok(())
    }

    pub fn load_replica(&self) -> Result<DataStore, StorageError> {
        let mut store = DataStore::new();
        for path in &self.replica_store_paths {
            store.load_csv_file(path)?;
        }
        Ok(store)
    }
}
