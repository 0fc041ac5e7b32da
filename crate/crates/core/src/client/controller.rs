use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::cost::{CostEvent, CostMeter};
use crate::storage::{DataCache, StorageError};
use crate::wire::{ErrorCode, Query, RequestEnvelope, ResponseEnvelope};
use crate::Mode;

use super::model::{ClientCounters, ClientModel};
use super::trace::{Outcome, Step, StepTrace};
use super::transport::Transport;
use super::{ClientConfig, ClientError};

/// A completed client transaction: the response, the XML document the
/// client model produced for the view, and the step trace.
#[derive(Debug, Clone)]
pub struct Transaction {
    pub response: ResponseEnvelope,
    pub document: Vec<u8>,
    pub trace: StepTrace,
}

struct Persistence {
    path: PathBuf,
    // Held for the controller's lifetime; the OS releases it on drop.
    _lock: File,
}

/// Client controller: the single entry point views use.
pub struct ClientController<T: Transport> {
    client_id: String,
    token: String,
    mode: Mode,
    model: ClientModel,
    transport: T,
    next_seq: u64,
    persistence: Option<Persistence>,
}

impl<T: Transport> ClientController<T> {
    pub fn new(client_id: impl Into<String>, token: impl Into<String>, model: ClientModel, transport: T) -> Self {
        let mode = if model.has_replica() { Mode::Dmvc } else { Mode::Spim };
        Self {
            client_id: client_id.into(),
            token: token.into(),
            mode,
            model,
            transport,
            next_seq: 1,
            persistence: None,
        }
    }

    /// Builds a controller from configuration, loading (and locking) the
    /// cache file when one is configured.
    pub fn open(config: &ClientConfig, transport: T, meter: Option<Arc<CostMeter>>) -> Result<Self, ClientError> {
        config.validate()?;
        let mut persistence = None;
        let cache = match &config.cache_path {
            None => DataCache::new(config.cache_capacity)?,
            Some(path) => {
                let lock = lock_cache_file(path)?;
                let cache = if path.exists() {
                    DataCache::load(path, config.cache_capacity)?
                } else {
                    DataCache::new(config.cache_capacity)?
                };
                persistence = Some(Persistence {
                    path: path.clone(),
                    _lock: lock,
                });
                cache
            }
        };
        let mut model = ClientModel::new(cache);
        if config.mode == Mode::Dmvc {
            model = model.with_replica(Arc::new(config.load_replica()?));
        }
        if let Some(m) = meter {
            model = model.with_meter(m);
        }
        let mut cc = Self::new(&config.client_id, &config.token, model, transport);
        cc.persistence = persistence;
        Ok(cc)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn counters(&self) -> ClientCounters {
        self.model.counters()
    }

    /// Read-only view of the cache for inspection; views never get the model itself.
    pub fn cache(&self) -> &DataCache {
        self.model.cache()
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn next_request_id(&mut self) -> String {
        let id = format!("{}-{:06}", self.client_id, self.next_seq);
        self.next_seq += 1;
        id
    }

    /// Runs one transaction for `q`: served from the cache when possible,
    /// otherwise fetched from the server and cached.
    pub fn cc_request(&mut self, q: &Query) -> Result<Transaction, ClientError> {
        let id = self.next_request_id();
        let mut trace = StepTrace::begin(id.clone());
        trace.step(Step::S01);
        trace.step(Step::S02);
        trace.step(Step::S03);
        let cached = self.model.cm_lookup(q);
        trace.step(Step::S04);

        if let Some(mut hit) = cached {
            hit.request_id = id;
            trace.step(Step::S05);
            let document = self.model.cm_to_xml(&hit);
            trace.step(Step::S06);
            trace.step(Step::S07);
            trace.finish(Outcome::Hit);
            return Ok(Transaction {
                response: hit,
                document,
                trace,
            });
        }

        if self.mode == Mode::Dmvc {
            // The duplicated client model searches its store copy as well;
            // the answer still comes from the server.
            if let Some(Err(e)) = self.model.replica_scan(q) {
                log::debug!("{id}: replica scan: {e}");
            }
        }

        trace.step(Step::S08);
        self.model.counters.server_round_trips += 1;
        self.model.charge(CostEvent::RoundTrip);
        let request = RequestEnvelope::new(&id, &self.client_id, &self.token, q.clone());
        let response = match self.transport.roundtrip(&request) {
            Ok(r) => r,
            Err(e) => {
                trace.finish(Outcome::Failed);
                log::debug!("{id}: transport failed after {:?}", trace.steps);
                return Err(e);
            }
        };

        if !response.is_ok() {
            if response.error_code == ErrorCode::NotFound {
                trace.step(Step::S09);
                trace.step(Step::S10);
                trace.step(Step::S11);
            }
            trace.finish(Outcome::Failed);
            let document = self.model.cm_to_xml(&response);
            return Ok(Transaction {
                response,
                document,
                trace,
            });
        }

        trace.step(Step::S09);
        trace.step(Step::S10);
        trace.step(Step::S11);
        trace.step(Step::S12);
        self.model.cm_store(q, response.clone())?;
        if self.mode == Mode::Dmvc {
            self.model.counters.sync_messages += 1;
        }
        if let Some(p) = &self.persistence {
            self.model.save_cache(&p.path)?;
        }
        let document = self.model.cm_to_xml(&response);
        trace.step(Step::S13);
        trace.step(Step::S14);
        trace.step(Step::S15);
        trace.finish(Outcome::MissServed);
        Ok(Transaction {
            response,
            document,
            trace,
        })
    }

    /// Stores a result received out of band (model synchronisation).
    pub(crate) fn sync_in(&mut self, q: &Query, payload: ResponseEnvelope) -> Result<(), StorageError> {
        self.model.cm_store(q, payload)?;
        self.model.counters.sync_messages += 1;
        Ok(())
    }

    pub fn persist(&self) -> Result<(), ClientError> {
        if let Some(p) = &self.persistence {
            self.model.save_cache(&p.path)?;
        }
        Ok(())
    }
}

fn lock_cache_file(path: &Path) -> Result<File, ClientError> {
    let mut lock_path = path.as_os_str().to_owned();
    lock_path.push(".lock");
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lock_path)
        .map_err(StorageError::from)?;
    file.try_lock()
        .map_err(|_| ClientError::CacheLocked(path.to_owned()))?;
    Ok(file)
}
