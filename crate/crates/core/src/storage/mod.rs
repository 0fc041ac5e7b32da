//! Data Store (server side) and Data Cache (client side).

mod cache;
mod store;

use thiserror::Error;

use crate::wire::{ErrorCode, Query};

pub use cache::{CacheEntry, DataCache, Lookup, DEFAULT_CACHE_CAPACITY};
pub use store::DataStore;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("no records for {0}")]
    NotFound(Query),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("cache capacity must be at least 1")]
    InvalidCapacity,
    #[error("refusing to cache an error response ({0})")]
    ErrorPayload(ErrorCode),
    #[error("malformed cache file at line {line}: {reason}")]
    MalformedCacheFile { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
