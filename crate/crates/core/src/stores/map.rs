use std::collections::{btree_map, hash_map, BTreeMap, HashMap};

use super::{AccessCounters, AdjointStore, Counter, SlotKind, SlotUsage};
use crate::error::Result;
use crate::tape::Identifier;

// Every access goes through the entry API: like `operator[]` on a C++ map, a
// read of an absent identifier inserts a zero cell.

/// Ordered-map adjoints; one node allocation per inserted identifier.
#[derive(Clone, Debug, Default)]
pub struct OrderedMapStore {
    entries: BTreeMap<Identifier, f64>,
    peak: u64,
    allocation_events: u64,
    counter: Counter,
}

impl OrderedMapStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_instrumentation(enabled: bool) -> Self {
        Self {
            counter: Counter::new(enabled),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops all entries for reuse by the next region; nodes are freed.
    pub fn clear(&mut self) {
        self.entries.clear();
    }

    #[inline]
    fn cell(&mut self, id: Identifier, weight: u64) -> &mut f64 {
        self.counter.map_access(weight);
        let len = self.entries.len() as u64;
        match self.entries.entry(id) {
            btree_map::Entry::Occupied(entry) => entry.into_mut(),
            btree_map::Entry::Vacant(entry) => {
                self.allocation_events += 1;
                self.peak = self.peak.max(len + 1);
                entry.insert(0.0)
            }
        }
    }
}

impl AdjointStore for OrderedMapStore {
    fn get(&mut self, id: Identifier) -> Result<f64> {
        Ok(*self.cell(id, 1))
    }

    fn set(&mut self, id: Identifier, value: f64) -> Result<()> {
        *self.cell(id, 1) = value;
        Ok(())
    }

    fn add(&mut self, id: Identifier, delta: f64) -> Result<()> {
        *self.cell(id, 2) += delta;
        Ok(())
    }

    fn take(&mut self, id: Identifier) -> Result<f64> {
        Ok(std::mem::take(self.cell(id, 1)))
    }

    fn slot_usage(&self) -> SlotUsage {
        SlotUsage {
            kind: SlotKind::OrderedEntry,
            live: self.entries.len() as u64,
            peak: self.peak,
            allocation_events: self.allocation_events,
        }
    }

    fn counters(&self) -> AccessCounters {
        self.counter.counts()
    }
}

/// Hash-map adjoints; an allocation event is a table growth.
#[derive(Clone, Debug, Default)]
pub struct HashMapStore {
    entries: HashMap<Identifier, f64>,
    peak: u64,
    allocation_events: u64,
    counter: Counter,
}

impl HashMapStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_instrumentation(enabled: bool) -> Self {
        Self {
            counter: Counter::new(enabled),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops all entries but keeps the table, so reuse allocates nothing.
    pub fn clear(&mut self) {
        self.entries.clear();
    }

    #[inline]
    fn cell(&mut self, id: Identifier, weight: u64) -> &mut f64 {
        self.counter.map_access(weight);
        let len = self.entries.len();
        let full = len == self.entries.capacity();
        match self.entries.entry(id) {
            hash_map::Entry::Occupied(entry) => entry.into_mut(),
            hash_map::Entry::Vacant(entry) => {
                // inserting into a full table reallocates it
                if full {
                    self.allocation_events += 1;
                }
                self.peak = self.peak.max(len as u64 + 1);
                entry.insert(0.0)
            }
        }
    }
}

impl AdjointStore for HashMapStore {
    fn get(&mut self, id: Identifier) -> Result<f64> {
        Ok(*self.cell(id, 1))
    }

    fn set(&mut self, id: Identifier, value: f64) -> Result<()> {
        *self.cell(id, 1) = value;
        Ok(())
    }

    fn add(&mut self, id: Identifier, delta: f64) -> Result<()> {
        *self.cell(id, 2) += delta;
        Ok(())
    }

    fn take(&mut self, id: Identifier) -> Result<f64> {
        Ok(std::mem::take(self.cell(id, 1)))
    }

    fn slot_usage(&self) -> SlotUsage {
        SlotUsage {
            kind: SlotKind::HashEntry,
            live: self.entries.len() as u64,
            peak: self.peak,
            allocation_events: self.allocation_events,
        }
    }

    fn counters(&self) -> AccessCounters {
        self.counter.counts()
    }
}
