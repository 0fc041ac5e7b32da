//! A server controller and one client controller wired together in a
//! single process, in either mode. The benchmark and the stats command run
//! on top of this.

use std::sync::Arc;

use crate::client::{ClientController, ClientError, ClientModel, InProcessTransport, Transaction};
use crate::cost::CostMeter;
use crate::dmvc::DmvcCounters;
use crate::server::ServerController;
use crate::storage::{DataCache, DataStore, StorageError};
use crate::wire::Query;
use crate::Mode;

const LOCAL_TOKEN: &str = "local";

pub struct LocalDeployment {
    mode: Mode,
    server: Arc<ServerController>,
    client: ClientController<InProcessTransport>,
}

impl LocalDeployment {
    pub fn new(
        store: Arc<DataStore>,
        mode: Mode,
        cache_capacity: usize,
        meter: Option<Arc<CostMeter>>,
    ) -> Result<Self, StorageError> {
        let mut server = ServerController::new(Arc::clone(&store), [LOCAL_TOKEN]).with_mode(mode, cache_capacity)?;
        let mut model = ClientModel::new(DataCache::new(cache_capacity)?);
        if mode == Mode::Dmvc {
            // Both tiers see the same data; the client model's copy is the duplicate.
            model = model.with_replica(store);
        }
        if let Some(m) = meter {
            server = server.with_meter(Arc::clone(&m));
            model = model.with_meter(m);
        }
        let server = Arc::new(server);
        let client = ClientController::new(
            "local-client",
            LOCAL_TOKEN,
            model,
            InProcessTransport::new(Arc::clone(&server)),
        );
        Ok(Self { mode, server, client })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn request(&mut self, q: &Query) -> Result<Transaction, ClientError> {
        self.client.cc_request(q)
    }

    pub fn server(&self) -> &ServerController {
        &self.server
    }

    pub fn client(&self) -> &ClientController<InProcessTransport> {
        &self.client
    }

    pub(crate) fn client_mut(&mut self) -> &mut ClientController<InProcessTransport> {
        &mut self.client
    }

    /// Scan and sync counters across both tiers.
    pub fn counters(&self) -> DmvcCounters {
        let c = self.client.counters();
        let s = self.server.counters();
        DmvcCounters {
            cm_cache_scans: c.cm_cache_scans,
            cm_ds_scans: c.ds_reads_attempted_by_cm,
            sm_cache_scans: s.dc_reads_attempted_by_sm,
            sm_ds_scans: s.ds_scans,
            sync_messages: c.sync_messages,
        }
    }
}
