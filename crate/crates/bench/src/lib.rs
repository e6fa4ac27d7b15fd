//! Workload presets shared by the criterion benches.

use preacc_core::harness::{generate_workload, Workload, WorkloadSpec};

/// Kernel shape used across benches: 3 inputs, 2 outputs, one shared input.
pub fn spec(threads: usize, chain_length: usize, padding: usize) -> WorkloadSpec {
    WorkloadSpec {
        threads,
        regions_per_worker: 8,
        chain_length,
        padding_statements: padding,
        ..WorkloadSpec::default()
    }
}

pub fn workload(threads: usize, chain_length: usize, padding: usize) -> Workload {
    generate_workload(&spec(threads, chain_length, padding)).expect("bench presets are valid")
}

/// Paddings for the identifier-spread sweep.
pub const PADDINGS: [usize; 4] = [0, 1_000, 10_000, 100_000];
