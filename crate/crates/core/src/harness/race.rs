//! Cooperative replay of two simultaneous preaccumulations that share an
//! input, one scheduler step at a time.

use std::fmt;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::workload::stream_rng;
use crate::error::{Error, Result};
use crate::preacc::{remap_and_edit, MapKind, PreaccRegion, Strategy};
use crate::stores::{
    AddMode, AdjointStore, FullLocalVector, HashMapStore, OffsetLocalVector, OrderedMapStore,
    SharedGlobalVector,
};
use crate::tape::{
    reset_range, reverse_statement, scan_identifiers, ActiveValue, Identifier, IdentifierCounter,
    SweepOptions, Tape,
};

/// Partials of the two regions `y1 = 2 u` and `y2 = 5 u`.
pub const RACE_PARTIALS: (f64, f64) = (2.0, 5.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceStepKind {
    /// `adj[y] = 1`
    Seed,
    /// Reverse step over the region's statement.
    Sweep,
    /// Read `adj[u]` as the Jacobian entry.
    Harvest,
    /// `reset_range` over the region.
    Reset,
}

/// Every job runs these steps in this order.
pub const JOB_STEPS: [RaceStepKind; 4] = [
    RaceStepKind::Seed,
    RaceStepKind::Sweep,
    RaceStepKind::Harvest,
    RaceStepKind::Reset,
];

impl RaceStepKind {
    fn letter(self) -> char {
        match self {
            RaceStepKind::Seed => 'S',
            RaceStepKind::Sweep => 'W',
            RaceStepKind::Harvest => 'H',
            RaceStepKind::Reset => 'R',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RaceStep {
    pub job: usize,
    pub kind: RaceStepKind,
    /// `adj[u]` in the job's store after the step.
    pub shared_cell: f64,
}

impl fmt::Display for RaceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.letter(), self.job + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RaceTrace {
    pub strategy: Strategy,
    /// Job index of each scheduler step.
    pub schedule: Vec<usize>,
    pub steps: Vec<RaceStep>,
    /// Entry each job harvested.
    pub harvested: [f64; 2],
    /// `adj[u]` as read by the first harvest that went wrong, or by the first
    /// harvest if none did.
    pub observed: f64,
    pub expected_separate: (f64, f64),
}

impl RaceTrace {
    pub fn is_correct(&self) -> bool {
        self.harvested == [self.expected_separate.0, self.expected_separate.1]
    }

    /// Whether a harvest saw the sum of both regions' entries.
    pub fn saw_sum(&self) -> bool {
        self.observed == self.expected_separate.0 + self.expected_separate.1
    }

    pub fn schedule_label(&self) -> String {
        let labels: Vec<String> = self.steps.iter().map(|s| s.to_string()).collect();
        labels.join(" ")
    }

    /// `u̅ = 7.0 (contaminated)` or `(2.0, 5.0) (correct)`.
    pub fn outcome(&self) -> String {
        if self.is_correct() {
            format!(
                "({:?}, {:?}) (correct)",
                self.harvested[0], self.harvested[1]
            )
        } else {
            format!("u\u{305} = {:?} (contaminated)", self.observed)
        }
    }
}

/// Schedule for `seed`: strict alternation for seed 0, otherwise a seeded
/// shuffle of the eight steps.
pub fn race_schedule(seed: u64) -> Vec<usize> {
    let mut schedule: Vec<usize> = (0..2 * JOB_STEPS.len()).map(|k| k % 2).collect();
    if seed != 0 {
        schedule.shuffle(&mut stream_rng(seed, 0));
    }
    schedule
}

/// All C(8, 4) = 70 interleavings, in lexicographic order.
pub fn all_race_schedules() -> Vec<Vec<usize>> {
    let steps = JOB_STEPS.len();
    let mut out = Vec::new();
    for mask in 0u32..1 << (2 * steps) {
        if mask.count_ones() as usize == steps {
            out.push(
                (0..2 * steps)
                    .map(|k| ((mask >> (2 * steps - 1 - k)) & 1) as usize)
                    .collect(),
            );
        }
    }
    out
}

struct Job {
    tape: Tape,
    region: PreaccRegion,
    input: Identifier,
    output: Identifier,
}

/// Records `u` on a prelude tape and `y_j = p_j u` as a region on tape `j`.
fn race_jobs() -> Result<(Vec<Job>, Identifier)> {
    let ids = IdentifierCounter::new();
    let mut prelude = Tape::new(2, ids.clone());
    let u = prelude.register_input(1.0);
    let mut jobs = Vec::new();
    for (owner, partial) in [RACE_PARTIALS.0, RACE_PARTIALS.1].into_iter().enumerate() {
        let mut tape = Tape::new(owner, ids.clone());
        let mut region = PreaccRegion::begin(&mut tape)?;
        region.add_input(&tape, u)?;
        let y = tape.mul(u, ActiveValue::passive(partial))?;
        region.add_output(&tape, y)?;
        region.end_recording(&mut tape)?;
        jobs.push(Job {
            tape,
            region,
            input: u.id,
            output: y.id,
        });
    }
    Ok((jobs, ids.max_assigned()))
}

fn local_store(
    strategy: Strategy,
    job: &mut Job,
    i_max: Identifier,
) -> Result<Box<dyn AdjointStore>> {
    let range = job.region.range()?;
    Ok(match strategy {
        Strategy::FullVector => Box::new(FullLocalVector::sized(i_max)),
        Strategy::OffsetVector => {
            let scan = scan_identifiers(&job.tape, range, job.region.inputs())?;
            Box::new(OffsetLocalVector::new(scan.min_id, scan.max_id)?)
        }
        Strategy::OrderedMap => Box::new(OrderedMapStore::new()),
        Strategy::HashMap => Box::new(HashMapStore::new()),
        Strategy::RemapOrdered | Strategy::RemapHashed => {
            let kind = if strategy == Strategy::RemapOrdered {
                MapKind::Ordered
            } else {
                MapKind::Hashed
            };
            let remap = remap_and_edit(&mut job.tape, &mut job.region, kind)?;
            let (inputs, outputs) = job.region.sweep_ids();
            job.input = inputs[0];
            job.output = outputs[0];
            Box::new(FullLocalVector::sized(Identifier(remap.len() as u32)))
        }
        Strategy::SharedGlobal | Strategy::SharedGlobalAtomic => unreachable!(),
    })
}

/// Replays the two-region example under `schedule` (job index per step).
pub fn simulate_race(strategy: Strategy, schedule: &[usize]) -> Result<RaceTrace> {
    let per_job = JOB_STEPS.len();
    if schedule.len() != 2 * per_job || schedule.iter().filter(|&&j| j == 0).count() != per_job {
        return Err(Error::InvalidWorkload(format!(
            "race schedule needs {per_job} steps per job, got {schedule:?}"
        )));
    }
    let (mut jobs, i_max) = race_jobs()?;
    let global = SharedGlobalVector::new();
    let mut stores: Vec<Box<dyn AdjointStore + '_>> = match strategy {
        Strategy::SharedGlobal => vec![Box::new(FullLocalVector::sized(i_max))],
        Strategy::SharedGlobalAtomic => {
            global.ensure_size(i_max);
            vec![
                Box::new(global.view(AddMode::Atomic)),
                Box::new(global.view(AddMode::Atomic)),
            ]
        }
        local => {
            let mut stores: Vec<Box<dyn AdjointStore>> = Vec::new();
            for job in jobs.iter_mut() {
                stores.push(local_store(local, job, i_max)?);
            }
            stores
        }
    };
    let shared = stores.len() == 1;

    let mut progress = [0usize; 2];
    let mut harvested = [f64::NAN; 2];
    let mut first_harvest = None;
    let mut first_wrong = None;
    let expected = [RACE_PARTIALS.0, RACE_PARTIALS.1];
    let mut steps = Vec::with_capacity(schedule.len());
    for &j in schedule {
        let kind = JOB_STEPS[progress[j]];
        progress[j] += 1;
        let job = &jobs[j];
        let store = &mut stores[if shared { 0 } else { j }];
        let range = job.region.range()?;
        match kind {
            RaceStepKind::Seed => store.set(job.output, 1.0)?,
            RaceStepKind::Sweep => {
                for statement in job.tape.statements(range).rev() {
                    reverse_statement(&statement, store.as_mut(), SweepOptions::default())?;
                }
            }
            RaceStepKind::Harvest => {
                let value = store.get(job.input)?;
                harvested[j] = value;
                first_harvest.get_or_insert(value);
                if value != expected[j] {
                    first_wrong.get_or_insert(value);
                }
            }
            RaceStepKind::Reset => reset_range(&job.tape, range, store.as_mut())?,
        }
        let shared_cell = store.get(job.input)?;
        steps.push(RaceStep {
            job: j,
            kind,
            shared_cell,
        });
    }
    Ok(RaceTrace {
        strategy,
        schedule: schedule.to_vec(),
        steps,
        harvested,
        observed: first_wrong.or(first_harvest).unwrap_or(f64::NAN),
        expected_separate: RACE_PARTIALS,
    })
}

pub fn simulate_race_seeded(strategy: Strategy, seed: u64) -> Result<RaceTrace> {
    simulate_race(strategy, &race_schedule(seed))
}

/// Runs `strategy` under every interleaving.
pub fn enumerate_race(strategy: Strategy) -> Result<Vec<RaceTrace>> {
    all_race_schedules()
        .iter()
        .map(|schedule| simulate_race(strategy, schedule))
        .collect()
}
