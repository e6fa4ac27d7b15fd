//! Preaccumulation of marked tape regions into Jacobian statements.

mod jacobian;
mod region;
mod remap;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use jacobian::{compute_jacobian, JacobianBlock, JacobianMode};
pub use region::{validate_region, PreaccRegion, Violation};
pub use remap::{remap_and_edit, IdentifierRemap, MapKind};

use crate::error::{Error, Result};
use crate::stores::{
    AccessCounters, AddMode, AdjointStore, CostModel, FullLocalVector, HashMapStore,
    OffsetLocalVector, OrderedMapStore, SharedGlobalVector, SlotUsage, StoreMemoryReport,
};
use crate::tape::{scan_identifiers, Identifier, Statement, Tape};

/// How a region's Jacobian is assembled, i.e. which adjoint store it uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SharedGlobal,
    SharedGlobalAtomic,
    FullVector,
    OffsetVector,
    OrderedMap,
    HashMap,
    RemapOrdered,
    RemapHashed,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::SharedGlobal,
        Strategy::SharedGlobalAtomic,
        Strategy::FullVector,
        Strategy::OffsetVector,
        Strategy::OrderedMap,
        Strategy::HashMap,
        Strategy::RemapOrdered,
        Strategy::RemapHashed,
    ];

    /// Strategies whose adjoints are confined to the finishing thread.
    pub const LOCAL: [Strategy; 6] = [
        Strategy::FullVector,
        Strategy::OffsetVector,
        Strategy::OrderedMap,
        Strategy::HashMap,
        Strategy::RemapOrdered,
        Strategy::RemapHashed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SharedGlobal => "shared_global",
            Strategy::SharedGlobalAtomic => "shared_global_atomic",
            Strategy::FullVector => "full_vector",
            Strategy::OffsetVector => "offset_vector",
            Strategy::OrderedMap => "ordered_map",
            Strategy::HashMap => "hash_map",
            Strategy::RemapOrdered => "remap_ordered",
            Strategy::RemapHashed => "remap_hashed",
        }
    }

    pub fn is_shared(self) -> bool {
        matches!(self, Strategy::SharedGlobal | Strategy::SharedGlobalAtomic)
    }

    pub fn is_local(self) -> bool {
        !self.is_shared()
    }

    pub fn uses_maps(self) -> bool {
        matches!(
            self,
            Strategy::OrderedMap
                | Strategy::HashMap
                | Strategy::RemapOrdered
                | Strategy::RemapHashed
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|strategy| strategy.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreaccConfig {
    pub mode: JacobianMode,
    /// Run the full-tape admissibility scan before each finish.
    pub validate: bool,
    /// Keep map stores across finishes of one worker instead of allocating fresh ones.
    pub reuse_maps: bool,
    /// Count store accesses. Timing runs switch this off.
    pub instrument: bool,
    pub cost_model: CostModel,
}

impl Default for PreaccConfig {
    fn default() -> Self {
        Self {
            mode: JacobianMode::Auto,
            validate: false,
            reuse_maps: false,
            instrument: true,
            cost_model: CostModel::default(),
        }
    }
}

/// Outcome of one `finish`.
#[derive(Clone, Debug, PartialEq)]
pub struct FinishReport {
    pub strategy: Strategy,
    pub jacobian: JacobianBlock,
    /// Store usage for this finish. Allocation events are those caused by
    /// this finish; slots describe the store it ran on.
    pub memory: StoreMemoryReport,
    /// Accesses, map operations and lock acquisitions of this finish.
    pub counters: AccessCounters,
    /// Statements and arguments the region occupied before replacement.
    pub original_statements: usize,
    pub original_args: usize,
    /// Tape range now holding the replacement statements.
    pub replacement: Range<usize>,
}

/// Per-worker preaccumulation context.
///
/// Holds the worker's persistent full vector, optionally reusable map
/// stores, and a handle to the shared global vector.
#[derive(Debug)]
pub struct Preaccumulator {
    shared: Arc<SharedGlobalVector>,
    full: FullLocalVector,
    ordered: OrderedMapStore,
    hashed: HashMapStore,
    config: PreaccConfig,
}

impl Preaccumulator {
    pub fn new(shared: Arc<SharedGlobalVector>, config: PreaccConfig) -> Self {
        Self {
            shared,
            full: FullLocalVector::with_instrumentation(config.instrument),
            ordered: OrderedMapStore::with_instrumentation(config.instrument),
            hashed: HashMapStore::with_instrumentation(config.instrument),
            config,
        }
    }

    /// A context with its own shared vector and default configuration.
    pub fn standalone() -> Self {
        Self::new(Arc::default(), PreaccConfig::default())
    }

    pub fn config(&self) -> &PreaccConfig {
        &self.config
    }

    pub fn shared(&self) -> &Arc<SharedGlobalVector> {
        &self.shared
    }

    /// Computes the region's Jacobian with `strategy` and replaces the
    /// region's statements by one statement per output.
    ///
    /// Output `j` becomes `outputs[j] <- (J[j][i], inputs[i])` over the
    /// nonzero entries. A pass-through output turns into a self-copy.
    pub fn finish(
        &mut self,
        tape: &mut Tape,
        mut region: PreaccRegion,
        strategy: Strategy,
    ) -> Result<FinishReport> {
        if !region.is_closed() {
            region.end_recording(tape)?;
        }
        let range = region.range()?;
        tape.check_range(&range)?;
        if self.config.validate {
            let violations = validate_region(tape, &region)?;
            if !violations.is_empty() {
                return Err(Error::Inadmissible(violations));
            }
        }
        let original_statements = range.len();
        let original_args = tape.arg_count(range.clone());
        let mode = self.config.mode;
        let model = self.config.cost_model;
        let instrument = self.config.instrument;

        let (jacobian, memory, counters) = match strategy {
            Strategy::SharedGlobal | Strategy::SharedGlobalAtomic => {
                let add_mode = if strategy == Strategy::SharedGlobal {
                    AddMode::Plain
                } else {
                    AddMode::Atomic
                };
                self.shared.ensure_size(tape.identifiers().max_assigned());
                let mut view = self.shared.view_instrumented(add_mode, instrument);
                let jacobian = compute_jacobian(tape, &region, &mut view, mode)?;
                let memory = view.memory_report_with(&model);
                let mut counters = view.counters();
                if instrument {
                    // the resize guard taken by ensure_size
                    counters.lock_acquisitions += 1;
                }
                (jacobian, memory, counters)
            }
            Strategy::FullVector => {
                self.full.ensure(tape.identifiers().max_assigned());
                run_on(&mut self.full, tape, &region, mode, &model)?
            }
            Strategy::OffsetVector => {
                let scan = scan_identifiers(tape, range.clone(), region.inputs())?;
                let mut store =
                    OffsetLocalVector::with_instrumentation(scan.min_id, scan.max_id, instrument)?;
                run_on(&mut store, tape, &region, mode, &model)?
            }
            Strategy::OrderedMap if self.config.reuse_maps => {
                self.ordered.clear();
                run_on(&mut self.ordered, tape, &region, mode, &model)?
            }
            Strategy::OrderedMap => {
                let mut store = OrderedMapStore::with_instrumentation(instrument);
                run_on(&mut store, tape, &region, mode, &model)?
            }
            Strategy::HashMap if self.config.reuse_maps => {
                self.hashed.clear();
                run_on(&mut self.hashed, tape, &region, mode, &model)?
            }
            Strategy::HashMap => {
                let mut store = HashMapStore::with_instrumentation(instrument);
                run_on(&mut store, tape, &region, mode, &model)?
            }
            Strategy::RemapOrdered | Strategy::RemapHashed => {
                let kind = if strategy == Strategy::RemapOrdered {
                    MapKind::Ordered
                } else {
                    MapKind::Hashed
                };
                let remap = remap_and_edit(tape, &mut region, kind)?;
                let (distinct, map_ops) = (remap.next_id(), remap.map_ops());
                drop(remap);
                let mut store = FullLocalVector::with_instrumentation(instrument);
                store.ensure(Identifier(distinct.0 - 1));
                let (jacobian, mut memory, mut counters) =
                    run_on(&mut store, tape, &region, mode, &model)?;
                if instrument {
                    counters.map_ops += map_ops;
                }
                // the initial sizing belongs to this finish
                memory.allocation_events += 1;
                (jacobian, memory, counters)
            }
        };

        let replacement = replacement_statements(&jacobian);
        tape.replace_range(range.clone(), &replacement);
        Ok(FinishReport {
            strategy,
            jacobian,
            memory,
            counters,
            original_statements,
            original_args,
            replacement: range.start..range.start + replacement.len(),
        })
    }
}

/// Runs `compute_jacobian` and reports usage and counters caused by the run.
fn run_on<S: AdjointStore>(
    store: &mut S,
    tape: &Tape,
    region: &PreaccRegion,
    mode: JacobianMode,
    model: &CostModel,
) -> Result<(JacobianBlock, StoreMemoryReport, AccessCounters)> {
    let before_usage = store.slot_usage();
    let before = store.counters();
    let jacobian = compute_jacobian(tape, region, store, mode)?;
    let after = store.counters();
    let usage = SlotUsage {
        allocation_events: store.slot_usage().allocation_events - before_usage.allocation_events,
        ..store.slot_usage()
    };
    let counters = AccessCounters {
        adjoint_accesses: after.adjoint_accesses - before.adjoint_accesses,
        map_ops: after.map_ops - before.map_ops,
        lock_acquisitions: after.lock_acquisitions - before.lock_acquisitions,
    };
    Ok((jacobian, usage.report(model), counters))
}

fn replacement_statements(jacobian: &JacobianBlock) -> Vec<Statement> {
    jacobian
        .outputs
        .iter()
        .enumerate()
        .map(|(row, &lhs)| Statement {
            lhs,
            args: jacobian
                .row(row)
                .iter()
                .zip(&jacobian.inputs)
                .filter(|(entry, _)| **entry != 0.0)
                .map(|(&entry, &input)| (entry, input))
                .collect(),
        })
        .collect()
}

/// Finishes a region on a throwaway context.
pub fn finish(tape: &mut Tape, region: PreaccRegion, strategy: Strategy) -> Result<JacobianBlock> {
    Preaccumulator::standalone()
        .finish(tape, region, strategy)
        .map(|report| report.jacobian)
}
