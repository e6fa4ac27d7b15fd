use super::{AccessCounters, AdjointStore, Counter, SlotKind, SlotUsage};
use crate::error::{Error, Result};
use crate::tape::Identifier;

/// Dense per-worker vector addressed directly by identifier.
///
/// Meant to persist across preaccumulations of one worker; it only grows.
#[derive(Clone, Debug, Default)]
pub struct FullLocalVector {
    data: Vec<f64>,
    peak: u64,
    allocation_events: u64,
    counter: Counter,
}

impl FullLocalVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_instrumentation(enabled: bool) -> Self {
        Self {
            counter: Counter::new(enabled),
            ..Self::default()
        }
    }

    /// A vector that accepts every identifier up to `max_id`.
    pub fn sized(max_id: Identifier) -> Self {
        let mut store = Self::new();
        store.ensure(max_id);
        store
    }

    /// Grows the vector to `max_id + 1` cells if needed; new cells are 0.
    pub fn ensure(&mut self, max_id: Identifier) {
        let needed = max_id.index() + 1;
        if needed > self.data.len() {
            self.data.resize(needed, 0.0);
            self.allocation_events += 1;
            self.peak = self.peak.max(self.data.len() as u64);
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reset_counters(&mut self) {
        self.counter = Counter::new(self.counter.enabled());
    }

    #[inline]
    fn cell(&mut self, id: Identifier) -> Result<&mut f64> {
        let len = self.data.len();
        self.data
            .get_mut(id.index())
            .ok_or(Error::StoreNotSized { id, len })
    }
}

impl AdjointStore for FullLocalVector {
    #[inline]
    fn get(&mut self, id: Identifier) -> Result<f64> {
        self.counter.access(1);
        self.cell(id).map(|c| *c)
    }

    #[inline]
    fn set(&mut self, id: Identifier, value: f64) -> Result<()> {
        self.counter.access(1);
        *self.cell(id)? = value;
        Ok(())
    }

    #[inline]
    fn add(&mut self, id: Identifier, delta: f64) -> Result<()> {
        self.counter.access(2);
        *self.cell(id)? += delta;
        Ok(())
    }

    #[inline]
    fn take(&mut self, id: Identifier) -> Result<f64> {
        self.counter.access(1);
        Ok(std::mem::take(self.cell(id)?))
    }

    fn slot_usage(&self) -> SlotUsage {
        SlotUsage {
            kind: SlotKind::Dense,
            live: self.data.len() as u64,
            peak: self.peak,
            allocation_events: self.allocation_events,
        }
    }

    fn counters(&self) -> AccessCounters {
        self.counter.counts()
    }
}

/// Dense vector covering the identifier window `[min, max]` of one region.
#[derive(Clone, Debug)]
pub struct OffsetLocalVector {
    data: Vec<f64>,
    min: Identifier,
    max: Identifier,
    counter: Counter,
}

impl OffsetLocalVector {
    pub fn new(min: Identifier, max: Identifier) -> Result<Self> {
        Self::with_instrumentation(min, max, true)
    }

    pub fn with_instrumentation(min: Identifier, max: Identifier, enabled: bool) -> Result<Self> {
        if min > max {
            return Err(Error::InconsistentRegionInfo {
                min,
                max,
                i_max: max,
            });
        }
        Ok(Self {
            data: vec![0.0; (max.0 - min.0) as usize + 1],
            min,
            max,
            counter: Counter::new(enabled),
        })
    }

    pub fn offset(&self) -> Identifier {
        self.min
    }

    #[inline]
    fn cell(&mut self, id: Identifier) -> Result<&mut f64> {
        if id < self.min || id > self.max {
            return Err(Error::OutOfWindow {
                id,
                min: self.min,
                max: self.max,
            });
        }
        Ok(&mut self.data[(id.0 - self.min.0) as usize])
    }
}

impl AdjointStore for OffsetLocalVector {
    #[inline]
    fn get(&mut self, id: Identifier) -> Result<f64> {
        self.counter.access(1);
        self.cell(id).map(|c| *c)
    }

    #[inline]
    fn set(&mut self, id: Identifier, value: f64) -> Result<()> {
        self.counter.access(1);
        *self.cell(id)? = value;
        Ok(())
    }

    #[inline]
    fn add(&mut self, id: Identifier, delta: f64) -> Result<()> {
        self.counter.access(2);
        *self.cell(id)? += delta;
        Ok(())
    }

    #[inline]
    fn take(&mut self, id: Identifier) -> Result<f64> {
        self.counter.access(1);
        Ok(std::mem::take(self.cell(id)?))
    }

    fn slot_usage(&self) -> SlotUsage {
        SlotUsage {
            kind: SlotKind::Dense,
            live: self.data.len() as u64,
            peak: self.data.len() as u64,
            allocation_events: 1,
        }
    }

    fn counters(&self) -> AccessCounters {
        self.counter.counts()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_vector_grows_and_never_shrinks() {
        let mut v = FullLocalVector::new();
        v.ensure(Identifier(7));
        assert_eq!(v.slot_usage().live, 8);
        v.ensure(Identifier(3));
        assert_eq!(v.slot_usage().live, 8);
        assert_eq!(v.slot_usage().allocation_events, 1);
        assert_eq!(v.get(Identifier(7)).unwrap(), 0.0);
        assert!(matches!(
            v.get(Identifier(8)),
            Err(Error::StoreNotSized { len: 8, .. })
        ));
    }

    #[test]
    fn full_vector_memory_report() {
        let v = FullLocalVector::sized(Identifier(1_000_000));
        assert_eq!(v.memory_report().modeled_bytes, 1_000_001 * 8);
    }

    #[test]
    fn offset_window_is_enforced() {
        let mut v = OffsetLocalVector::new(Identifier(5), Identifier(8)).unwrap();
        assert_eq!(v.slot_usage().live, 4);
        v.add(Identifier(5), 1.5).unwrap();
        v.add(Identifier(8), 2.5).unwrap();
        assert_eq!(v.take(Identifier(5)).unwrap(), 1.5);
        assert_eq!(v.get(Identifier(5)).unwrap(), 0.0);
        assert_eq!(v.get(Identifier(8)).unwrap(), 2.5);
        assert!(matches!(
            v.get(Identifier(4)),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(matches!(
            v.set(Identifier(9), 1.0),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(OffsetLocalVector::new(Identifier(9), Identifier(8)).is_err());
    }

    #[test]
    fn access_weights() {
        let mut v = FullLocalVector::sized(Identifier(3));
        v.get(Identifier(1)).unwrap();
        v.set(Identifier(1), 1.0).unwrap();
        v.add(Identifier(1), 1.0).unwrap();
        v.take(Identifier(1)).unwrap();
        assert_eq!(v.counters().adjoint_accesses, 5);
        assert_eq!(v.counters().map_ops, 0);
    }
}
