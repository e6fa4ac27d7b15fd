use thiserror::Error;

use crate::tape::Identifier;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite partial {partial} for argument {position} of statement {lhs}")]
    NonFinitePartial {
        lhs: Identifier,
        position: usize,
        partial: f64,
    },

    #[error("arity mismatch: {inputs} inputs but {partials} partials")]
    ArityMismatch { inputs: usize, partials: usize },

    #[error("tape range {start}..{end} is invalid for a tape of {len} statements")]
    InvalidRange {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("identifier scan over an empty range")]
    EmptyRange,

    #[error("identifier {id} outside offset store window [{min}, {max}]")]
    OutOfWindow {
        id: Identifier,
        min: Identifier,
        max: Identifier,
    },

    #[error("identifier {id} exceeds store size {len}; call ensure_size first")]
    StoreNotSized { id: Identifier, len: usize },

    #[error("inconsistent region info: min {min}, max {max}, i_max {i_max}")]
    InconsistentRegionInfo {
        min: Identifier,
        max: Identifier,
        i_max: Identifier,
    },

    #[error("a preaccumulation region is already open on tape {owner}")]
    NestedRegion { owner: usize },

    #[error("region belongs to tape {expected}, got tape {actual}")]
    ForeignTape { expected: usize, actual: usize },

    #[error("region is closed")]
    RegionClosed,

    #[error("passive value (identifier 0) cannot be a region {role}")]
    PassiveIdentifier { role: &'static str },

    #[error("identifier {id} declared twice as region {role}")]
    DuplicateIdentifier { id: Identifier, role: &'static str },

    #[error("output {id} is not assigned inside the region")]
    OutputOutsideRegion { id: Identifier },

    #[error("input {id} is assigned inside the region")]
    InputInsideRegion { id: Identifier },

    #[error("region violates the admissibility rules: {0:?}")]
    Inadmissible(Vec<crate::preacc::Violation>),

    #[error("region has already been edited")]
    AlreadyRemapped,

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}
