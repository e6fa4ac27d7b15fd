use serde::{Deserialize, Serialize};

use super::{
    AccessCounters, AdjointStore, FullLocalVector, HashMapStore, OffsetLocalVector,
    OrderedMapStore, SlotUsage,
};
use crate::error::{Error, Result};
use crate::tape::Identifier;

/// The four thread-local adjoint layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalStoreKind {
    FullVector,
    OffsetVector,
    OrderedMap,
    HashMap,
}

/// Identifier bounds of a region plus the global maximum identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionInfo {
    pub min_id: Identifier,
    pub max_id: Identifier,
    pub i_max: Identifier,
}

impl RegionInfo {
    fn check(&self) -> Result<()> {
        if self.min_id <= self.max_id && self.max_id <= self.i_max {
            Ok(())
        } else {
            Err(Error::InconsistentRegionInfo {
                min: self.min_id,
                max: self.max_id,
                i_max: self.i_max,
            })
        }
    }
}

/// Any of the thread-local layouts behind one type.
#[derive(Clone, Debug)]
pub enum LocalStore {
    FullVector(FullLocalVector),
    OffsetVector(OffsetLocalVector),
    OrderedMap(OrderedMapStore),
    HashMap(HashMapStore),
}

/// Creates a fresh local store sized for `info`.
///
/// The full vector covers `0..=i_max`, the offset vector `min_id..=max_id`;
/// map stores start empty and fill on first access.
pub fn make_local_store(kind: LocalStoreKind, info: RegionInfo) -> Result<LocalStore> {
    info.check()?;
    Ok(match kind {
        LocalStoreKind::FullVector => LocalStore::FullVector(FullLocalVector::sized(info.i_max)),
        LocalStoreKind::OffsetVector => {
            LocalStore::OffsetVector(OffsetLocalVector::new(info.min_id, info.max_id)?)
        }
        LocalStoreKind::OrderedMap => LocalStore::OrderedMap(OrderedMapStore::new()),
        LocalStoreKind::HashMap => LocalStore::HashMap(HashMapStore::new()),
    })
}

macro_rules! dispatch {
    ($self:ident, $store:ident => $body:expr) => {
        match $self {
            LocalStore::FullVector($store) => $body,
            LocalStore::OffsetVector($store) => $body,
            LocalStore::OrderedMap($store) => $body,
            LocalStore::HashMap($store) => $body,
        }
    };
}

impl AdjointStore for LocalStore {
    fn get(&mut self, id: Identifier) -> Result<f64> {
        dispatch!(self, s => s.get(id))
    }

    fn set(&mut self, id: Identifier, value: f64) -> Result<()> {
        dispatch!(self, s => s.set(id, value))
    }

    fn add(&mut self, id: Identifier, delta: f64) -> Result<()> {
        dispatch!(self, s => s.add(id, delta))
    }

    fn take(&mut self, id: Identifier) -> Result<f64> {
        dispatch!(self, s => s.take(id))
    }

    fn slot_usage(&self) -> SlotUsage {
        dispatch!(self, s => s.slot_usage())
    }

    fn counters(&self) -> AccessCounters {
        dispatch!(self, s => s.counters())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INFO: RegionInfo = RegionInfo {
        min_id: Identifier(5),
        max_id: Identifier(8),
        i_max: Identifier(1000),
    };

    #[test]
    fn initial_sizes() {
        let live = |kind| {
            make_local_store(kind, INFO)
                .unwrap()
                .memory_report()
                .live_slots
        };
        assert_eq!(live(LocalStoreKind::OffsetVector), 4);
        assert_eq!(live(LocalStoreKind::FullVector), 1001);
        assert_eq!(live(LocalStoreKind::HashMap), 0);
        assert_eq!(live(LocalStoreKind::OrderedMap), 0);
    }

    #[test]
    fn inconsistent_info_is_rejected() {
        let bad = RegionInfo {
            min_id: Identifier(9),
            ..INFO
        };
        assert!(make_local_store(LocalStoreKind::HashMap, bad).is_err());
        let bad = RegionInfo {
            i_max: Identifier(7),
            ..INFO
        };
        assert!(make_local_store(LocalStoreKind::FullVector, bad).is_err());
    }
}
