use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::cost::{CostEvent, CostMeter};
use crate::storage::{DataCache, DataStore, StorageError};
use crate::wire::{
    decode_request, encode_response, ErrorCode, Query, Record, RequestEnvelope, ResponseEnvelope, Source,
};
use crate::Mode;

/// Snapshot of the server tier's counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TierCounters {
    pub sc_requests: u64,
    pub sm_invocations: u64,
    pub ds_scans: u64,
    /// Server-model probes of a server-side cache. Always zero in SPIM mode,
    /// where the server model has no cache at all.
    pub dc_reads_attempted_by_sm: u64,
    pub unauthorized: u64,
    pub malformed: u64,
}

#[derive(Debug, Default)]
struct Counters {
    sc_requests: AtomicU64,
    sm_invocations: AtomicU64,
    ds_scans: AtomicU64,
    dc_reads_attempted_by_sm: AtomicU64,
    unauthorized: AtomicU64,
    malformed: AtomicU64,
}

fn bump(c: &AtomicU64) {
    c.fetch_add(1, Ordering::Relaxed);
}

/// The server model: sole holder of the data store. Only reachable
/// through [`ServerController`], which owns it privately.
#[derive(Debug)]
struct ServerModel {
    store: Arc<DataStore>,
    /// Server-side copy of the client cache; present only in dmvc mode.
    replica: Option<Mutex<DataCache>>,
}

impl ServerModel {
    fn fetch(
        &self,
        q: &Query,
        request_id: &str,
        counters: &Counters,
        meter: Option<&CostMeter>,
    ) -> Result<(Vec<Record>, Source), StorageError> {
        bump(&counters.sm_invocations);
        if let Some(replica) = &self.replica {
            bump(&counters.dc_reads_attempted_by_sm);
            let probe = replica.lock().expect("server cache poisoned").lookup(q);
            if let Some(m) = meter {
                m.charge(CostEvent::ServerCacheScan { entries: probe.scanned });
            }
            if let Some(hit) = probe.hit {
                return Ok((hit.records, Source::Cache));
            }
        }
        bump(&counters.ds_scans);
        if let Some(m) = meter {
            m.charge(CostEvent::ServerStoreScan {
                records: self.store.scan_cost(q),
            });
        }
        let records = self.store.scan(q)?;
        if let Some(replica) = &self.replica {
            let copy = ResponseEnvelope::ok(request_id, Source::Store, records.clone());
            replica.lock().expect("server cache poisoned").store(q, copy)?;
        }
        Ok((records, Source::Store))
    }
}

/// Server controller: authenticates requests and is the only path to the
/// server model.
#[derive(Debug)]
pub struct ServerController {
    mode: Mode,
    accepted_tokens: Option<HashSet<String>>,
    model: ServerModel,
    counters: Counters,
    meter: Option<Arc<CostMeter>>,
}

impl ServerController {
    /// SPIM-mode controller accepting the given tokens.
    pub fn new(store: Arc<DataStore>, tokens: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            mode: Mode::Spim,
            accepted_tokens: Some(tokens.into_iter().map(Into::into).collect()),
            model: ServerModel { store, replica: None },
            counters: Counters::default(),
            meter: None,
        }
    }

    /// Switches to dmvc mode, giving the server model a cache replica.
    pub fn with_dmvc_replica(mut self, capacity: usize) -> Result<Self, StorageError> {
        self.mode = Mode::Dmvc;
        self.model.replica = Some(Mutex::new(DataCache::new(capacity)?));
        Ok(self)
    }

    pub fn with_mode(self, mode: Mode, capacity: usize) -> Result<Self, StorageError> {
        match mode {
            Mode::Spim => Ok(self),
            Mode::Dmvc => self.with_dmvc_replica(capacity),
        }
    }

    pub fn with_meter(mut self, meter: Arc<CostMeter>) -> Self {
        self.meter = Some(meter);
        self
    }

    /// Accept every token. Only meant for closed test setups.
    pub fn without_auth(mut self) -> Self {
        self.accepted_tokens = None;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn meter(&self) -> Option<&Arc<CostMeter>> {
        self.meter.as_ref()
    }

    pub fn counters(&self) -> TierCounters {
        let c = &self.counters;
        TierCounters {
            sc_requests: c.sc_requests.load(Ordering::Relaxed),
            sm_invocations: c.sm_invocations.load(Ordering::Relaxed),
            ds_scans: c.ds_scans.load(Ordering::Relaxed),
            dc_reads_attempted_by_sm: c.dc_reads_attempted_by_sm.load(Ordering::Relaxed),
            unauthorized: c.unauthorized.load(Ordering::Relaxed),
            malformed: c.malformed.load(Ordering::Relaxed),
        }
    }

    fn authorized(&self, token: &str) -> bool {
        match &self.accepted_tokens {
            None => true,
            Some(tokens) => tokens.contains(token),
        }
    }

    pub fn sc_handle(&self, req: &RequestEnvelope) -> ResponseEnvelope {
        bump(&self.counters.sc_requests);
        if !self.authorized(&req.token) {
            bump(&self.counters.unauthorized);
            log::debug!("request {} from {:?} rejected: bad token", req.request_id, req.client_id);
            return ResponseEnvelope::error(&req.request_id, ErrorCode::Unauthorized);
        }
        match self
            .model
            .fetch(&req.query, &req.request_id, &self.counters, self.meter.as_deref())
        {
            Ok((records, source)) => ResponseEnvelope::ok(&req.request_id, source, records),
            Err(StorageError::NotFound(_)) => ResponseEnvelope::error(&req.request_id, ErrorCode::NotFound),
            Err(e) => {
                // Replica insertion can only fail on an invariant breach.
                log::error!("request {}: {e}", req.request_id);
                ResponseEnvelope::error(&req.request_id, ErrorCode::NotFound)
            }
        }
    }

    /// Decodes one request document and returns the encoded response.
    /// Undecodable input is answered with ERROR/MALFORMED.
    pub fn handle_document(&self, doc: &[u8]) -> Vec<u8> {
        let resp = match decode_request(doc) {
            Ok(req) => self.sc_handle(&req),
            Err(e) => {
                bump(&self.counters.malformed);
                log::debug!("malformed request: {e}");
                ResponseEnvelope::error("", ErrorCode::Malformed)
            }
        };
        encode_response(&resp)
    }

    /// Inserts a store-served result into the server-side replica.
    /// Returns false in SPIM mode, where no replica exists.
    pub fn sync_replica(&self, q: &Query, payload: &ResponseEnvelope) -> Result<bool, StorageError> {
        match &self.model.replica {
            None => Ok(false),
            Some(replica) => {
                replica.lock().expect("server cache poisoned").store(q, payload.clone())?;
                Ok(true)
            }
        }
    }

    /// Non-mutating check of the server-side replica.
    pub fn replica_contains(&self, q: &Query) -> bool {
        self.model
            .replica
            .as_ref()
            .is_some_and(|r| r.lock().expect("server cache poisoned").contains(q))
    }
}
