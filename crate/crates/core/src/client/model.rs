use std::sync::Arc;

use crate::cost::{CostEvent, CostMeter};
use crate::storage::{DataCache, DataStore, StorageError};
use crate::wire::{encode_response, Query, Record, ResponseEnvelope};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClientCounters {
    pub cm_cache_scans: u64,
    /// Client-model searches of the data store. Zero in SPIM mode, where
    /// the client model holds no store handle.
    pub ds_reads_attempted_by_cm: u64,
    pub server_round_trips: u64,
    pub sync_messages: u64,
}

/// Client model: sole owner of the data cache.
#[derive(Debug)]
pub struct ClientModel {
    cache: DataCache,
    /// Store replica, present only for the duplicated-model baseline.
    replica: Option<Arc<DataStore>>,
    meter: Option<Arc<CostMeter>>,
    pub(crate) counters: ClientCounters,
}

impl ClientModel {
    pub fn new(cache: DataCache) -> Self {
        Self {
            cache,
            replica: None,
            meter: None,
            counters: ClientCounters::default(),
        }
    }

    pub fn with_replica(mut self, replica: Arc<DataStore>) -> Self {
        self.replica = Some(replica);
        self
    }

    pub fn with_meter(mut self, meter: Arc<CostMeter>) -> Self {
        self.meter = Some(meter);
        self
    }

    pub fn cache(&self) -> &DataCache {
        &self.cache
    }

    pub fn counters(&self) -> ClientCounters {
        self.counters
    }

    pub(crate) fn charge(&self, event: CostEvent) {
        if let Some(m) = &self.meter {
            m.charge(event);
        }
    }

    /// Probes the cache. `None` is the cache-miss signal.
    pub fn cm_lookup(&mut self, q: &Query) -> Option<ResponseEnvelope> {
        self.counters.cm_cache_scans += 1;
        let probe = self.cache.lookup(q);
        self.charge(CostEvent::ClientCacheScan { entries: probe.scanned });
        probe.hit
    }

    pub fn cm_store(&mut self, q: &Query, payload: ResponseEnvelope) -> Result<Option<String>, StorageError> {
        self.cache.store(q, payload)
    }

    pub fn cm_to_xml(&self, resp: &ResponseEnvelope) -> Vec<u8> {
        encode_response(resp)
    }

    pub fn has_replica(&self) -> bool {
        self.replica.is_some()
    }

    /// Searches the client-side store replica, modelling a remote store
    /// scan (one round trip plus a full table walk). Returns `None` when no
    /// replica is attached.
    pub fn replica_scan(&mut self, q: &Query) -> Option<Result<Vec<Record>, StorageError>> {
        let replica = self.replica.as_ref()?;
        self.counters.ds_reads_attempted_by_cm += 1;
        self.charge(CostEvent::RoundTrip);
        self.charge(CostEvent::ClientStoreScan {
            records: replica.scan_cost(q),
        });
        Some(replica.scan(q))
    }

    pub(crate) fn save_cache(&self, path: &std::path::Path) -> Result<(), StorageError> {
        self.cache.save(path)
    }
}
