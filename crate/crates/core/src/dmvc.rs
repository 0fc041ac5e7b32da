//! Duplicated-model baseline.
//!
//! Model and controller exist on both tiers. On a client cache miss the
//! request takes the redundant route: the client model also searches the
//! store, the server model also searches its cache copy, and the result is
//! synchronised into both caches before the response returns. Records
//! served are the same as in SPIM mode; only the work differs.

use std::ops::Sub;

use crate::client::{ClientError, Transaction};
use crate::deployment::LocalDeployment;
use crate::storage::StorageError;
use crate::wire::{Query, ResponseEnvelope};
use crate::Mode;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DmvcCounters {
    pub cm_cache_scans: u64,
    pub cm_ds_scans: u64,
    pub sm_cache_scans: u64,
    pub sm_ds_scans: u64,
    pub sync_messages: u64,
}

impl DmvcCounters {
    pub fn scans(&self) -> (u64, u64, u64, u64) {
        (self.cm_cache_scans, self.cm_ds_scans, self.sm_cache_scans, self.sm_ds_scans)
    }
}

impl Sub for DmvcCounters {
    type Output = DmvcCounters;

    fn sub(self, before: DmvcCounters) -> DmvcCounters {
        DmvcCounters {
            cm_cache_scans: self.cm_cache_scans - before.cm_cache_scans,
            cm_ds_scans: self.cm_ds_scans - before.cm_ds_scans,
            sm_cache_scans: self.sm_cache_scans - before.sm_cache_scans,
            sm_ds_scans: self.sm_ds_scans - before.sm_ds_scans,
            sync_messages: self.sync_messages - before.sync_messages,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DmvcError {
    #[error("deployment is in {0} mode, not dmvc")]
    WrongMode(Mode),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// Runs one transaction on a dmvc deployment and reports the counter delta.
pub fn dmvc_request(dep: &mut LocalDeployment, q: &Query) -> Result<(Transaction, DmvcCounters), DmvcError> {
    if dep.mode() != Mode::Dmvc {
        return Err(DmvcError::WrongMode(dep.mode()));
    }
    let before = dep.counters();
    let txn = dep.request(q)?;
    Ok((txn, dep.counters() - before))
}

/// Pushes a store-served result into both the client-side and server-side
/// caches and counts one sync message.
pub fn sync_models(dep: &mut LocalDeployment, q: &Query, result: &ResponseEnvelope) -> Result<(), DmvcError> {
    if dep.mode() != Mode::Dmvc {
        return Err(DmvcError::WrongMode(dep.mode()));
    }
    dep.server().sync_replica(q, result)?;
    dep.client_mut().sync_in(q, result.clone())?;
    Ok(())
}
