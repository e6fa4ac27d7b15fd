//! Adjoint/tangent storage behind one access contract.
//!
//! Six implementations: the shared global vector (plain or atomic updates)
//! and four thread-local layouts (full vector, offset vector, ordered map,
//! hash map). The remap strategies in [`crate::preacc`] reuse the dense vector
//! on an edited tape. All stores count accesses and allocation events so
//! strategies can be compared without a wall clock.

mod local;
mod map;
mod shared;
mod vector;

use std::io;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tape::Identifier;

pub use local::{make_local_store, LocalStore, LocalStoreKind, RegionInfo};
pub use map::{HashMapStore, OrderedMapStore};
pub use shared::{AddMode, SharedGlobalVector, SharedView};
pub use vector::{FullLocalVector, OffsetLocalVector};

/// Access contract shared by every adjoint store.
///
/// Cells never written read as 0. Accesses are weighted for the
/// `adjoint_accesses` counter: `get`, `set` and `take` count 1, `add` counts 2
/// (read and write). Map-backed stores count one map operation per call.
pub trait AdjointStore {
    fn get(&mut self, id: Identifier) -> Result<f64>;

    fn set(&mut self, id: Identifier, value: f64) -> Result<()>;

    fn add(&mut self, id: Identifier, delta: f64) -> Result<()>;

    /// Reads a cell and resets it to 0 as one access.
    fn take(&mut self, id: Identifier) -> Result<f64>;

    fn slot_usage(&self) -> SlotUsage;

    fn counters(&self) -> AccessCounters;

    fn memory_report(&self) -> StoreMemoryReport {
        self.memory_report_with(&CostModel::default())
    }

    fn memory_report_with(&self, model: &CostModel) -> StoreMemoryReport {
        self.slot_usage().report(model)
    }
}

/// What one slot of a store costs under the [`CostModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Dense,
    OrderedEntry,
    HashEntry,
}

/// Bytes per slot. Reports always carry raw slot counts as well.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub dense_slot_bytes: u64,
    pub ordered_entry_bytes: u64,
    pub hash_entry_bytes: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            dense_slot_bytes: 8,
            ordered_entry_bytes: 48,
            hash_entry_bytes: 24,
        }
    }
}

impl CostModel {
    pub fn bytes_per_slot(&self, kind: SlotKind) -> u64 {
        match kind {
            SlotKind::Dense => self.dense_slot_bytes,
            SlotKind::OrderedEntry => self.ordered_entry_bytes,
            SlotKind::HashEntry => self.hash_entry_bytes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotUsage {
    pub kind: SlotKind,
    pub live: u64,
    pub peak: u64,
    pub allocation_events: u64,
}

impl SlotUsage {
    pub fn report(&self, model: &CostModel) -> StoreMemoryReport {
        StoreMemoryReport {
            live_slots: self.live,
            peak_slots: self.peak,
            modeled_bytes: self.peak * model.bytes_per_slot(self.kind),
            allocation_events: self.allocation_events,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMemoryReport {
    pub live_slots: u64,
    pub peak_slots: u64,
    pub modeled_bytes: u64,
    pub allocation_events: u64,
}

impl Add for StoreMemoryReport {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            live_slots: self.live_slots + rhs.live_slots,
            peak_slots: self.peak_slots + rhs.peak_slots,
            modeled_bytes: self.modeled_bytes + rhs.modeled_bytes,
            allocation_events: self.allocation_events + rhs.allocation_events,
        }
    }
}

impl AddAssign for StoreMemoryReport {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounters {
    pub adjoint_accesses: u64,
    pub map_ops: u64,
    pub lock_acquisitions: u64,
}

impl Add for AccessCounters {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            adjoint_accesses: self.adjoint_accesses + rhs.adjoint_accesses,
            map_ops: self.map_ops + rhs.map_ops,
            lock_acquisitions: self.lock_acquisitions + rhs.lock_acquisitions,
        }
    }
}

impl AddAssign for AccessCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Instrumentation hook embedded in every store.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Counter {
    enabled: bool,
    counts: AccessCounters,
}

impl Counter {
    pub(crate) fn new(enabled: bool) -> Self {
        Self {
            enabled,
            counts: AccessCounters::default(),
        }
    }

    #[inline]
    pub(crate) fn access(&mut self, weight: u64) {
        if self.enabled {
            self.counts.adjoint_accesses += weight;
        }
    }

    #[inline]
    pub(crate) fn map_access(&mut self, weight: u64) {
        if self.enabled {
            self.counts.adjoint_accesses += weight;
            self.counts.map_ops += 1;
        }
    }

    pub(crate) fn lock(&mut self) {
        if self.enabled {
            self.counts.lock_acquisitions += 1;
        }
    }

    pub(crate) fn counts(&self) -> AccessCounters {
        self.counts
    }

    pub(crate) fn enabled(&self) -> bool {
        self.enabled
    }
}

impl Default for Counter {
    fn default() -> Self {
        Self::new(true)
    }
}

/// One line of the store report CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreReportRow {
    pub strategy: String,
    pub live_slots: u64,
    pub peak_slots: u64,
    pub modeled_bytes: u64,
    pub allocation_events: u64,
    pub access_count: u64,
}

impl StoreReportRow {
    pub fn new(
        strategy: impl Into<String>,
        report: StoreMemoryReport,
        counters: AccessCounters,
    ) -> Self {
        Self {
            strategy: strategy.into(),
            live_slots: report.live_slots,
            peak_slots: report.peak_slots,
            modeled_bytes: report.modeled_bytes,
            allocation_events: report.allocation_events,
            access_count: counters.adjoint_accesses,
        }
    }
}

pub fn write_store_reports<W: io::Write>(writer: W, rows: &[StoreReportRow]) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}
