//! Server tier: the server controller (request gate) and the server model
//! it owns, plus a TCP front end speaking framed XML.

mod controller;
mod net;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::cost::{CostMeter, CostModel};
use crate::storage::{DataStore, StorageError, DEFAULT_CACHE_CAPACITY};
use crate::wire::DEFAULT_MAX_FRAME;
use crate::Mode;

pub use controller::{ServerController, TierCounters};
pub use net::{serve_controller, ServerHandle};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("loading data store: {0}")]
    Store(#[from] StorageError),
    #[error("cannot bind {0}: {1}")]
    Bind(String, std::io::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub listen_address: String,
    pub auth: bool,
    pub accepted_tokens: BTreeSet<String>,
    pub data_store_paths: Vec<PathBuf>,
    pub mode: Mode,
    pub cache_capacity: usize,
    pub instrumentation: bool,
    pub max_frame: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:7878".into(),
            auth: true,
            accepted_tokens: BTreeSet::new(),
            data_store_paths: Vec::new(),
            mode: Mode::Spim,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            instrumentation: false,
            max_frame: DEFAULT_MAX_FRAME,
        }
    }
}

impl ServerConfig {
    pub const KEYS: &'static [&'static str] = &[
        "listen",
        "tokens",
        "auth",
        "store",
        "mode",
        "cache_capacity",
        "instrumentation",
        "max_frame",
    ];

    /// Reads `listen`, `tokens` (comma separated), `store` (comma separated
    /// CSV paths, table name = file stem), `mode`, `auth`, `instrumentation`,
    /// `cache_capacity` and `max_frame`.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        kv.reject_unknown(Self::KEYS)?;
        let defaults = Self::default();
        let base = kv.base_dir();
        let config = Self {
            listen_address: kv.get("listen").unwrap_or(&defaults.listen_address).to_owned(),
            auth: kv.parse_flag_or("auth", defaults.auth)?,
            accepted_tokens: kv.list("tokens").into_iter().collect(),
            data_store_paths: kv.list("store").into_iter().map(|p| base.join(p)).collect(),
            mode: kv.parse_or("mode", defaults.mode)?,
            cache_capacity: kv.parse_or("cache_capacity", defaults.cache_capacity)?,
            instrumentation: kv.parse_flag_or("instrumentation", defaults.instrumentation)?,
            max_frame: kv.parse_or("max_frame", defaults.max_frame)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.auth && self.accepted_tokens.is_empty() {
            return Err(ConfigError::invalid("tokens", "at least one token is required while auth is on"));
        }
        if self.cache_capacity == 0 {
            return Err(ConfigError::invalid("cache_capacity", "must be at least 1"));
        }
        Ok(())
    }

    pub fn load_store(&self) -> Result<DataStore, StorageError> {
        let mut store = DataStore::new();
        for path in &self.data_store_paths {
            store.load_csv_file(path)?;
        }
        Ok(store)
    }

    pub fn build_controller(&self) -> Result<ServerController, ServerError> {
        self.validate()?;
        let store = Arc::new(self.load_store()?);
        let mut controller = ServerController::new(store, self.accepted_tokens.iter().cloned())
            .with_mode(self.mode, self.cache_capacity)?;
        if !self.auth {
            controller = controller.without_auth();
        }
        if self.instrumentation {
            controller = controller.with_meter(Arc::new(CostMeter::new(CostModel::default())));
        }
        Ok(controller)
    }
}

/// Loads the store and starts serving. Startup failures are returned
/// before any handle exists.
pub fn serve(config: &ServerConfig) -> Result<ServerHandle, ServerError> {
    let controller = Arc::new(config.build_controller()?);
    serve_controller(controller, &config.listen_address, config.max_frame)
}
