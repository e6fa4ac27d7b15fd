//! Jacobian-taping reverse-mode AD with pluggable adjoint stores, region
//! preaccumulation, and a harness for simultaneous preaccumulation on
//! several threads.
//!
//! ```
//! use preacc_core::{finish, IdentifierCounter, PreaccRegion, Strategy, Tape};
//!
//! let mut tape = Tape::new(0, IdentifierCounter::new());
//! let x = tape.register_input(2.0);
//! let y = tape.register_input(3.0);
//! let mut region = PreaccRegion::begin(&mut tape)?;
//! region.add_input(&tape, x)?;
//! region.add_input(&tape, y)?;
//! let xy = tape.mul(x, y)?;
//! let z = tape.sin(xy)?;
//! region.add_output(&tape, z)?;
//!
//! let jacobian = finish(&mut tape, region, Strategy::HashMap)?;
//! assert_eq!(jacobian.get(0, 0), 3.0 * 6.0f64.cos());
//! // the region now occupies a single statement z <- (dz/dx, x) (dz/dy, y)
//! assert_eq!(tape.len(), 3);
//! # Ok::<(), preacc_core::Error>(())
//! ```

pub mod error;
pub mod harness;
pub mod preacc;
pub mod stores;
pub mod tape;

pub use error::{Error, Result};
pub use preacc::{
    compute_jacobian, finish, remap_and_edit, validate_region, FinishReport, IdentifierRemap,
    JacobianBlock, JacobianMode, MapKind, PreaccConfig, PreaccRegion, Preaccumulator, Strategy,
    Violation,
};
pub use stores::{
    make_local_store, AccessCounters, AddMode, AdjointStore, CostModel, FullLocalVector,
    HashMapStore, LocalStore, LocalStoreKind, OffsetLocalVector, OrderedMapStore, RegionInfo,
    SharedGlobalVector, SlotKind, SlotUsage, StoreMemoryReport,
};
pub use tape::{
    evaluate_forward, evaluate_reverse, evaluate_reverse_with, reset_range, scan_identifiers,
    ActiveValue, ElementaryOp, Identifier, IdentifierCounter, IdentifierScan, Statement,
    SweepOptions, Tape, TapePosition,
};
