//! Workload generation, simultaneous preaccumulation runs, measurement and
//! the race simulator.

mod race;
mod run;
mod workload;

pub use race::{
    all_race_schedules, enumerate_race, race_schedule, simulate_race, simulate_race_seeded,
    RaceStep, RaceStepKind, RaceTrace, JOB_STEPS, RACE_PARTIALS,
};
pub use run::{
    measure, reverse_all, run_simultaneous, HarnessResult, Measurement, RunOptions, TimingStats,
};
pub use workload::{
    generate_workload, stream_rng, uniform_op_mix, Kernel, KernelStep, WorkerTape, Workload,
    WorkloadSpec, INPUT_RANGE,
};
