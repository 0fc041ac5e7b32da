//! Deterministic cost accounting shared by both tiers.
//!
//! Every cache probe is charged per entry examined, every store scan per
//! record walked, and every client/server round trip a flat amount. The
//! meter keeps both a running total and the event log so the two can be
//! cross-checked after a run.

use std::fmt;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub scan_cost_per_record: f64,
    pub network_rtt_cost: f64,
    pub enabled: bool,
}

impl CostModel {
    pub fn new(scan_cost_per_record: f64, network_rtt_cost: f64) -> Self {
        Self {
            scan_cost_per_record,
            network_rtt_cost,
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn cost_of(&self, event: CostEvent) -> f64 {
        match event {
            CostEvent::ClientCacheScan { entries } | CostEvent::ServerCacheScan { entries } => {
                entries as f64 * self.scan_cost_per_record
            }
            CostEvent::ClientStoreScan { records } | CostEvent::ServerStoreScan { records } => {
                records as f64 * self.scan_cost_per_record
            }
            CostEvent::RoundTrip => self.network_rtt_cost,
        }
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self::new(1.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostEvent {
    ClientCacheScan { entries: usize },
    ServerCacheScan { entries: usize },
    /// A client-side model searching the store (only the duplicated-model baseline does this).
    ClientStoreScan { records: usize },
    ServerStoreScan { records: usize },
    RoundTrip,
}

impl fmt::Display for CostEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostEvent::ClientCacheScan { entries } => write!(f, "client_cache_scan entries={entries}"),
            CostEvent::ServerCacheScan { entries } => write!(f, "server_cache_scan entries={entries}"),
            CostEvent::ClientStoreScan { records } => write!(f, "client_store_scan records={records}"),
            CostEvent::ServerStoreScan { records } => write!(f, "server_store_scan records={records}"),
            CostEvent::RoundTrip => f.write_str("round_trip"),
        }
    }
}

#[derive(Debug, Default)]
struct MeterState {
    total: f64,
    log: Vec<(CostEvent, f64)>,
}

#[derive(Debug)]
pub struct CostMeter {
    model: CostModel,
    state: Mutex<MeterState>,
}

impl CostMeter {
    pub fn new(model: CostModel) -> Self {
        Self {
            model,
            state: Mutex::new(MeterState::default()),
        }
    }

    pub fn model(&self) -> CostModel {
        self.model
    }

    pub fn charge(&self, event: CostEvent) {
        let cost = self.model.cost_of(event);
        log::trace!("cost {event} -> {cost}");
        let mut state = self.state.lock().expect("cost meter poisoned");
        state.total += cost;
        state.log.push((event, cost));
    }

    pub fn total(&self) -> f64 {
        self.state.lock().expect("cost meter poisoned").total
    }

    pub fn events(&self) -> Vec<(CostEvent, f64)> {
        self.state.lock().expect("cost meter poisoned").log.clone()
    }

    /// Sum recomputed from the event log, independent of the running total.
    pub fn event_sum(&self) -> f64 {
        self.events()
            .iter()
            .map(|(event, _)| self.model.cost_of(*event))
            .sum()
    }

    pub fn reset(&self) {
        *self.state.lock().expect("cost meter poisoned") = MeterState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charges_accumulate() {
        let meter = CostMeter::new(CostModel::new(2.0, 5.0));
        meter.charge(CostEvent::ServerStoreScan { records: 10 });
        meter.charge(CostEvent::ClientCacheScan { entries: 3 });
        meter.charge(CostEvent::RoundTrip);
        assert_eq!(meter.total(), 20.0 + 6.0 + 5.0);
        assert_eq!(meter.event_sum(), meter.total());
        assert_eq!(meter.events().len(), 3);
        meter.reset();
        assert_eq!(meter.total(), 0.0);
        assert!(meter.events().is_empty());
    }
}
