use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::region::EditedIds;
use super::PreaccRegion;
use crate::error::{Error, Result};
use crate::tape::{Identifier, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Ordered,
    Hashed,
}

#[derive(Clone, Debug)]
enum IdMap {
    Ordered(BTreeMap<Identifier, Identifier>),
    Hashed(HashMap<Identifier, Identifier>),
}

/// Injective map from original identifiers onto `1..=len()`, numbered in
/// order of first encounter.
#[derive(Clone, Debug)]
pub struct IdentifierRemap {
    mapping: IdMap,
    next: u32,
    map_ops: u64,
}

impl IdentifierRemap {
    pub fn new(kind: MapKind) -> Self {
        let mapping = match kind {
            MapKind::Ordered => IdMap::Ordered(BTreeMap::new()),
            MapKind::Hashed => IdMap::Hashed(HashMap::new()),
        };
        Self {
            mapping,
            next: 1,
            map_ops: 0,
        }
    }

    /// Offers the pair `(original, next)`: inserts it if `original` is new
    /// and advances `next`, otherwise returns the existing image.
    pub fn offer(&mut self, original: Identifier) -> Identifier {
        self.map_ops += 1;
        let candidate = Identifier(self.next);
        let image = match &mut self.mapping {
            IdMap::Ordered(map) => *map.entry(original).or_insert(candidate),
            IdMap::Hashed(map) => *map.entry(original).or_insert(candidate),
        };
        if image == candidate {
            self.next += 1;
        }
        image
    }

    pub fn lookup(&mut self, original: Identifier) -> Option<Identifier> {
        self.map_ops += 1;
        match &self.mapping {
            IdMap::Ordered(map) => map.get(&original).copied(),
            IdMap::Hashed(map) => map.get(&original).copied(),
        }
    }

    pub fn len(&self) -> usize {
        (self.next - 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.next == 1
    }

    /// The next unused contiguous identifier.
    pub fn next_id(&self) -> Identifier {
        Identifier(self.next)
    }

    pub fn map_ops(&self) -> u64 {
        self.map_ops
    }

    pub fn pairs(&self) -> Vec<(Identifier, Identifier)> {
        match &self.mapping {
            IdMap::Ordered(map) => map.iter().map(|(&k, &v)| (k, v)).collect(),
            IdMap::Hashed(map) => map.iter().map(|(&k, &v)| (k, v)).collect(),
        }
    }
}

/// Rewrites the region's identifiers onto `1..=|V|` in one pass.
///
/// Declared inputs are numbered first, then every identifier of every
/// statement (arguments before the lhs). The region keeps its original input
/// and output lists and records the remapped ones next to them.
pub fn remap_and_edit(
    tape: &mut Tape,
    region: &mut PreaccRegion,
    kind: MapKind,
) -> Result<IdentifierRemap> {
    if region.edited.is_some() {
        return Err(Error::AlreadyRemapped);
    }
    let range = region.range()?;
    tape.check_range(&range)?;
    let mut remap = IdentifierRemap::new(kind);
    let inputs: Vec<Identifier> = region.inputs().iter().map(|&id| remap.offer(id)).collect();
    tape.edit_identifiers(range, |id| remap.offer(id));
    let outputs = region
        .outputs()
        .iter()
        .map(|&id| remap.lookup(id).ok_or(Error::OutputOutsideRegion { id }))
        .collect::<Result<Vec<_>>>()?;
    region.edited = Some(EditedIds { inputs, outputs });
    Ok(remap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_encounter_numbering() {
        for kind in [MapKind::Ordered, MapKind::Hashed] {
            let mut remap = IdentifierRemap::new(kind);
            let images: Vec<u32> = [1000, 5, 1000, 42]
                .into_iter()
                .map(|id| remap.offer(Identifier(id)).0)
                .collect();
            assert_eq!(images, vec![1, 2, 1, 3]);
            assert_eq!(remap.next_id(), Identifier(4));
            assert_eq!(remap.len(), 3);
            assert_eq!(remap.map_ops(), 4);
        }
    }
}
