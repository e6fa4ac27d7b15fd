use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::workload::{generate_workload, Workload, WorkloadSpec};
use crate::error::{Error, Result};
use crate::preacc::{FinishReport, JacobianBlock, PreaccConfig, Preaccumulator, Strategy};
use crate::stores::{
    AccessCounters, AdjointStore, FullLocalVector, SharedGlobalVector, StoreMemoryReport,
};
use crate::tape::{evaluate_reverse, Tape};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PreaccConfig,
    /// Also finish the workload on one thread and compare Jacobians.
    pub compare_serial: bool,
    /// Time a reverse sweep over the finished tapes.
    pub evaluate: bool,
}

#[derive(Clone, Debug)]
pub struct HarnessResult {
    pub strategy: Strategy,
    pub threads: usize,
    /// Jacobians per worker, in region order.
    pub jacobians: Vec<Vec<JacobianBlock>>,
    pub worker_memory: Vec<StoreMemoryReport>,
    /// Sum over workers; for shared strategies the one global vector.
    pub memory: StoreMemoryReport,
    pub counters: AccessCounters,
    pub record_time: Duration,
    pub preacc_time: Duration,
    pub eval_time: Duration,
    /// Regions whose Jacobian differs bitwise from the serial reference,
    /// when the comparison was requested.
    pub mismatches: Option<usize>,
    /// Finished worker tapes.
    pub tapes: Vec<Tape>,
}

impl HarnessResult {
    /// Whether two runs produced bit-identical Jacobians for every region.
    pub fn same_jacobians(&self, other: &HarnessResult) -> bool {
        self.jacobians.len() == other.jacobians.len()
            && self.jacobians.iter().zip(&other.jacobians).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.bit_identical(y))
            })
    }
}

struct WorkerOutcome {
    tape: Tape,
    reports: Vec<FinishReport>,
}

/// Finishes one worker's regions, last region first so earlier tape
/// positions stay valid, and returns the reports in region order.
fn finish_worker(
    mut tape: Tape,
    regions: Vec<crate::preacc::PreaccRegion>,
    strategy: Strategy,
    shared: Arc<SharedGlobalVector>,
    config: PreaccConfig,
) -> Result<WorkerOutcome> {
    let mut context = Preaccumulator::new(shared, config);
    let mut reports = Vec::with_capacity(regions.len());
    for region in regions.into_iter().rev() {
        reports.push(context.finish(&mut tape, region, strategy)?);
    }
    reports.reverse();
    Ok(WorkerOutcome { tape, reports })
}

fn worker_memory(reports: &[FinishReport]) -> StoreMemoryReport {
    let mut memory = StoreMemoryReport::default();
    for report in reports {
        memory.live_slots = report.memory.live_slots;
        memory.peak_slots = memory.peak_slots.max(report.memory.peak_slots);
        memory.modeled_bytes = memory.modeled_bytes.max(report.memory.modeled_bytes);
        memory.allocation_events += report.memory.allocation_events;
    }
    memory
}

fn run_workers(
    workload: &Workload,
    strategy: Strategy,
    config: &PreaccConfig,
    threads: usize,
) -> Result<(Vec<WorkerOutcome>, Arc<SharedGlobalVector>, Duration)> {
    let shared = Arc::new(SharedGlobalVector::new());
    let jobs: Vec<_> = workload
        .workers
        .iter()
        .map(|w| (w.tape.clone(), w.regions.clone()))
        .collect();
    let start = Instant::now();
    let outcomes = if threads == 1 {
        jobs.into_iter()
            .map(|(tape, regions)| {
                finish_worker(tape, regions, strategy, shared.clone(), config.clone())
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .into_iter()
                .map(|(tape, regions)| {
                    let shared = shared.clone();
                    let config = config.clone();
                    scope.spawn(move || finish_worker(tape, regions, strategy, shared, config))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("preaccumulation worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };
    Ok((outcomes, shared, start.elapsed()))
}

/// Finishes every worker's regions on its own thread with `strategy`.
///
/// Mismatches against the serial reference are counted, never raised: plain
/// shared storage is expected to produce them when inputs are shared.
pub fn run_simultaneous(
    workload: &Workload,
    strategy: Strategy,
    options: &RunOptions,
) -> Result<HarnessResult> {
    let threads = workload.workers.len();
    let (outcomes, shared, preacc_time) =
        run_workers(workload, strategy, &options.config, threads)?;

    let mut counters = AccessCounters::default();
    let mut worker_reports = Vec::with_capacity(threads);
    for outcome in &outcomes {
        for report in &outcome.reports {
            counters += report.counters;
        }
        worker_reports.push(worker_memory(&outcome.reports));
    }
    let memory = if strategy.is_shared() {
        shared.memory_report()
    } else {
        worker_reports
            .iter()
            .fold(StoreMemoryReport::default(), |a, &b| a + b)
    };
    let jacobians: Vec<Vec<JacobianBlock>> = outcomes
        .iter()
        .map(|o| o.reports.iter().map(|r| r.jacobian.clone()).collect())
        .collect();

    let mismatches = if options.compare_serial {
        let (serial, _, _) = run_workers(workload, strategy, &options.config, 1)?;
        let count = serial
            .iter()
            .zip(&jacobians)
            .flat_map(|(s, run)| s.reports.iter().zip(run))
            .filter(|(s, run)| !s.jacobian.bit_identical(run))
            .count();
        Some(count)
    } else {
        None
    };

    let tapes: Vec<Tape> = outcomes.into_iter().map(|o| o.tape).collect();
    let eval_time = if options.evaluate {
        let start = Instant::now();
        reverse_all(workload, &tapes)?;
        start.elapsed()
    } else {
        Duration::ZERO
    };

    Ok(HarnessResult {
        strategy,
        threads,
        jacobians,
        worker_memory: worker_reports,
        memory,
        counters,
        record_time: workload.record_time,
        preacc_time,
        eval_time,
        mismatches,
        tapes,
    })
}

/// Serial reverse sweep over all worker tapes with every region output
/// seeded by 1. Returns the adjoints of the shared inputs followed by each
/// worker's private inputs.
pub fn reverse_all(workload: &Workload, tapes: &[Tape]) -> Result<Vec<f64>> {
    let mut adjoints = FullLocalVector::with_instrumentation(false);
    adjoints.ensure(workload.ids.max_assigned());
    for (tape, worker) in tapes.iter().zip(&workload.workers) {
        for output in worker.outputs.iter().flatten() {
            adjoints.add(output.id, 1.0)?;
        }
        evaluate_reverse(tape, 0..tape.len(), &mut adjoints)?;
    }
    let s = workload.spec.shared_inputs;
    let private = workload
        .workers
        .iter()
        .flat_map(|w| w.inputs.iter().flat_map(|inputs| &inputs[s..]));
    workload
        .shared_inputs
        .iter()
        .chain(private)
        .map(|input| adjoints.get(input.id))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TimingStats {
    pub mean_ns: u64,
    pub min_ns: u64,
    pub max_ns: u64,
    pub runs: usize,
}

impl TimingStats {
    pub fn from_durations(durations: &[Duration]) -> Self {
        if durations.is_empty() {
            return Self::default();
        }
        let ns: Vec<u64> = durations.iter().map(|d| d.as_nanos() as u64).collect();
        Self {
            mean_ns: ns.iter().sum::<u64>() / ns.len() as u64,
            min_ns: *ns.iter().min().unwrap(),
            max_ns: *ns.iter().max().unwrap(),
            runs: ns.len(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Measurement {
    pub spec: WorkloadSpec,
    pub strategy: Strategy,
    pub record: TimingStats,
    pub preacc: TimingStats,
    pub eval: TimingStats,
    /// From the separate instrumented run.
    pub memory: StoreMemoryReport,
    pub counters: AccessCounters,
}

/// One discarded warm-up, `repetitions` timed runs without access counting,
/// then one instrumented run for memory and counters.
pub fn measure(spec: &WorkloadSpec, strategy: Strategy, repetitions: usize) -> Result<Measurement> {
    if repetitions == 0 {
        return Err(Error::InvalidWorkload(
            "repetitions must be at least 1".into(),
        ));
    }
    let timed = RunOptions {
        config: PreaccConfig {
            instrument: false,
            ..PreaccConfig::default()
        },
        compare_serial: false,
        evaluate: true,
    };
    let mut record = Vec::with_capacity(repetitions);
    let mut preacc = Vec::with_capacity(repetitions);
    let mut eval = Vec::with_capacity(repetitions);
    for run in 0..=repetitions {
        let workload = generate_workload(spec)?;
        let result = run_simultaneous(&workload, strategy, &timed)?;
        if run > 0 {
            record.push(result.record_time);
            preacc.push(result.preacc_time);
            eval.push(result.eval_time);
        }
    }
    let workload = generate_workload(spec)?;
    let counted = run_simultaneous(&workload, strategy, &RunOptions::default())?;
    Ok(Measurement {
        spec: spec.clone(),
        strategy,
        record: TimingStats::from_durations(&record),
        preacc: TimingStats::from_durations(&preacc),
        eval: TimingStats::from_durations(&eval),
        memory: counted.memory,
        counters: counted.counters,
    })
}
