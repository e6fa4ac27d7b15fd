//! The global adjoint vector shared by all workers.
//!
//! Cells are `AtomicU64` holding `f64` bits so that concurrent access is
//! memory-safe. In [`AddMode::Plain`] an `add` is a separate load and store:
//! concurrent adds on one cell can lose updates, which is what the race
//! reproduction relies on. [`AddMode::Atomic`] uses a compare-and-swap loop.
//!
//! The resize guard is a reader/writer lock: evaluations hold it shared for a
//! whole sweep through a [`SharedView`], `ensure_size` holds it exclusively.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{RwLock, RwLockReadGuard};

use super::{AccessCounters, AdjointStore, Counter, SlotKind, SlotUsage, StoreMemoryReport};
use crate::error::{Error, Result};
use crate::tape::Identifier;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AddMode {
    /// Load, add, store. Unsound when two workers touch the same cell.
    #[default]
    Plain,
    /// Lossless under concurrency.
    Atomic,
}

#[derive(Debug, Default)]
pub struct SharedGlobalVector {
    cells: RwLock<Vec<AtomicU64>>,
    peak: AtomicU64,
    allocation_events: AtomicU64,
    adjoint_accesses: AtomicU64,
    lock_acquisitions: AtomicU64,
}

impl SharedGlobalVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes every identifier up to `max_id` addressable. Never shrinks.
    pub fn ensure_size(&self, max_id: Identifier) {
        let mut cells = self.cells.write().unwrap_or_else(|e| e.into_inner());
        self.lock_acquisitions.fetch_add(1, Ordering::Relaxed);
        let needed = max_id.index() + 1;
        if needed > cells.len() {
            cells.resize_with(needed, || AtomicU64::new(0f64.to_bits()));
            self.allocation_events.fetch_add(1, Ordering::Relaxed);
            self.peak.fetch_max(needed as u64, Ordering::Relaxed);
        }
    }

    /// Acquires shared access for one evaluation.
    pub fn view(&self, mode: AddMode) -> SharedView<'_> {
        self.view_instrumented(mode, true)
    }

    pub fn view_instrumented(&self, mode: AddMode, instrument: bool) -> SharedView<'_> {
        let cells = self.cells.read().unwrap_or_else(|e| e.into_inner());
        self.lock_acquisitions.fetch_add(1, Ordering::Relaxed);
        let mut counter = Counter::new(instrument);
        counter.lock();
        SharedView {
            owner: self,
            cells,
            mode,
            counter,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot_usage(&self) -> SlotUsage {
        SlotUsage {
            kind: SlotKind::Dense,
            live: self.len() as u64,
            peak: self.peak.load(Ordering::Relaxed),
            allocation_events: self.allocation_events.load(Ordering::Relaxed),
        }
    }

    pub fn memory_report(&self) -> StoreMemoryReport {
        self.slot_usage().report(&Default::default())
    }

    /// Totals over all views dropped so far plus every lock acquisition.
    pub fn counters(&self) -> AccessCounters {
        AccessCounters {
            adjoint_accesses: self.adjoint_accesses.load(Ordering::Relaxed),
            map_ops: 0,
            lock_acquisitions: self.lock_acquisitions.load(Ordering::Relaxed),
        }
    }
}

/// Shared access to the global vector for the duration of one evaluation.
pub struct SharedView<'a> {
    owner: &'a SharedGlobalVector,
    cells: RwLockReadGuard<'a, Vec<AtomicU64>>,
    mode: AddMode,
    counter: Counter,
}

impl SharedView<'_> {
    pub fn mode(&self) -> AddMode {
        self.mode
    }

    #[inline]
    fn cell(&self, id: Identifier) -> Result<&AtomicU64> {
        self.cells.get(id.index()).ok_or(Error::StoreNotSized {
            id,
            len: self.cells.len(),
        })
    }
}

impl AdjointStore for SharedView<'_> {
    #[inline]
    fn get(&mut self, id: Identifier) -> Result<f64> {
        self.counter.access(1);
        Ok(f64::from_bits(self.cell(id)?.load(Ordering::Relaxed)))
    }

    #[inline]
    fn set(&mut self, id: Identifier, value: f64) -> Result<()> {
        self.counter.access(1);
        self.cell(id)?.store(value.to_bits(), Ordering::Relaxed);
        Ok(())
    }

    #[inline]
    fn add(&mut self, id: Identifier, delta: f64) -> Result<()> {
        self.counter.access(2);
        let cell = self.cell(id)?;
        match self.mode {
            AddMode::Plain => {
                let old = f64::from_bits(cell.load(Ordering::Relaxed));
                cell.store((old + delta).to_bits(), Ordering::Relaxed);
            }
            AddMode::Atomic => {
                let _ = cell.fetch_update(Ordering::AcqRel, Ordering::Relaxed, |bits| {
                    Some((f64::from_bits(bits) + delta).to_bits())
                });
            }
        }
        Ok(())
    }

    #[inline]
    fn take(&mut self, id: Identifier) -> Result<f64> {
        self.counter.access(1);
        let cell = self.cell(id)?;
        let bits = match self.mode {
            AddMode::Plain => {
                let bits = cell.load(Ordering::Relaxed);
                cell.store(0f64.to_bits(), Ordering::Relaxed);
                bits
            }
            AddMode::Atomic => cell.swap(0f64.to_bits(), Ordering::AcqRel),
        };
        Ok(f64::from_bits(bits))
    }

    fn slot_usage(&self) -> SlotUsage {
        SlotUsage {
            kind: SlotKind::Dense,
            live: self.cells.len() as u64,
            peak: self.owner.peak.load(Ordering::Relaxed),
            allocation_events: self.owner.allocation_events.load(Ordering::Relaxed),
        }
    }

    /// Counts of this view only; the lock acquisition that created it included.
    fn counters(&self) -> AccessCounters {
        self.counter.counts()
    }
}

impl Drop for SharedView<'_> {
    fn drop(&mut self) {
        self.owner
            .adjoint_accesses
            .fetch_add(self.counter.counts().adjoint_accesses, Ordering::Relaxed);
    }
}
