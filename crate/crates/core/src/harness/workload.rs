use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preacc::PreaccRegion;
use crate::tape::{ActiveValue, ElementaryOp, IdentifierCounter, Tape};

/// Parameters of a family of isomorphic preaccumulation workloads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    #[serde(rename = "T")]
    pub threads: usize,
    pub regions_per_worker: usize,
    pub chain_length: usize,
    pub n_inputs: usize,
    pub m_outputs: usize,
    pub shared_inputs: usize,
    #[serde(default = "uniform_op_mix")]
    pub op_mix: BTreeMap<ElementaryOp, f64>,
    pub seed: u64,
    pub padding_statements: usize,
}

pub fn uniform_op_mix() -> BTreeMap<ElementaryOp, f64> {
    ElementaryOp::ALL.iter().map(|&op| (op, 1.0)).collect()
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            threads: 4,
            regions_per_worker: 4,
            chain_length: 32,
            n_inputs: 3,
            m_outputs: 2,
            shared_inputs: 1,
            op_mix: uniform_op_mix(),
            seed: 1,
            padding_statements: 1000,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidWorkload(msg.to_string()));
        if self.threads == 0 {
            return fail("T must be at least 1");
        }
        if self.regions_per_worker == 0 {
            return fail("regions_per_worker must be at least 1");
        }
        if self.chain_length == 0 {
            return fail("chain_length must be at least 1");
        }
        if self.n_inputs == 0 || self.m_outputs == 0 {
            return fail("n_inputs and m_outputs must be at least 1");
        }
        if self.m_outputs > self.chain_length {
            return fail("m_outputs exceeds chain_length");
        }
        if self.shared_inputs > self.n_inputs {
            return fail("shared_inputs exceeds n_inputs");
        }
        if self.op_mix.values().any(|w| !w.is_finite() || *w < 0.0) {
            return fail("op_mix weights must be finite and non-negative");
        }
        if self.op_mix.values().sum::<f64>() <= 0.0 {
            return fail("op_mix needs a positive weight");
        }
        Ok(())
    }

    /// Node count of one region: its statements plus its inputs.
    pub fn region_nodes(&self) -> usize {
        self.chain_length + self.n_inputs
    }
}

/// Value range of generated inputs.
pub const INPUT_RANGE: (f64, f64) = (0.5, 1.5);

/// Magnitude bound that every generated intermediate provably respects.
const BOUND: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    fn bounded(self) -> Option<Self> {
        (self.lo >= -BOUND && self.hi <= BOUND).then_some(self)
    }

    fn hull(values: [f64; 4]) -> Self {
        Self {
            lo: values.iter().copied().fold(f64::INFINITY, f64::min),
            hi: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Result interval of `op` if it is safe on the operand intervals.
fn admissible(op: ElementaryOp, a: Interval, b: Interval) -> Option<Interval> {
    match op {
        ElementaryOp::Add => Interval {
            lo: a.lo + b.lo,
            hi: a.hi + b.hi,
        }
        .bounded(),
        ElementaryOp::Sub => Interval {
            lo: a.lo - b.hi,
            hi: a.hi - b.lo,
        }
        .bounded(),
        ElementaryOp::Mul => {
            Interval::hull([a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi]).bounded()
        }
        ElementaryOp::Div => {
            if b.lo < 0.5 && b.hi > -0.5 {
                return None;
            }
            let (r0, r1) = (1.0 / b.lo, 1.0 / b.hi);
            Interval::hull([a.lo * r0, a.lo * r1, a.hi * r0, a.hi * r1]).bounded()
        }
        ElementaryOp::Sin | ElementaryOp::Cos => Some(Interval { lo: -1.0, hi: 1.0 }),
        ElementaryOp::Exp => (a.hi <= BOUND.ln()).then(|| Interval {
            lo: a.lo.exp(),
            hi: a.hi.exp(),
        }),
        ElementaryOp::Log => (a.lo >= 1.0 / BOUND).then(|| Interval {
            lo: a.lo.ln(),
            hi: a.hi.ln(),
        }),
        ElementaryOp::Copy => Some(a),
    }
}

/// One kernel statement over a value pool. Pool slots `0..n` are the inputs,
/// slot `n + k` is the result of step `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelStep {
    pub op: ElementaryOp,
    pub a: usize,
    pub b: usize,
}

/// A random straight-line program with `n` inputs and `m` outputs.
///
/// Generation, per step `k` of `L`: draw the op from `op_mix`, then draw the
/// secondary operand uniformly from the pool. The primary operand is input
/// `k` while `k < n` and the previous result afterwards. If the op is not
/// provably safe for inputs in [`INPUT_RANGE`] (interval arithmetic, all
/// values within +-4, no log or division near zero) it is replaced by `sin`.
/// The outputs are the last `m` results.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub n_inputs: usize,
    pub m_outputs: usize,
    pub steps: Vec<KernelStep>,
}

impl Kernel {
    pub fn generate(
        rng: &mut impl Rng,
        n_inputs: usize,
        m_outputs: usize,
        length: usize,
        op_mix: &BTreeMap<ElementaryOp, f64>,
    ) -> Result<Self> {
        if n_inputs == 0 || m_outputs == 0 || m_outputs > length {
            return Err(Error::InvalidWorkload(format!(
                "kernel with n={n_inputs}, m={m_outputs}, L={length}"
            )));
        }
        let ops: Vec<ElementaryOp> = op_mix.keys().copied().collect();
        let weights = WeightedIndex::new(op_mix.values().copied())
            .map_err(|e| Error::InvalidWorkload(format!("op_mix: {e}")))?;
        let input = Interval {
            lo: INPUT_RANGE.0,
            hi: INPUT_RANGE.1,
        };
        let mut ranges = vec![input; n_inputs];
        let mut steps = Vec::with_capacity(length);
        for k in 0..length {
            let drawn = ops[weights.sample(rng)];
            let b = rng.gen_range(0..ranges.len());
            let a = if k < n_inputs { k } else { ranges.len() - 1 };
            let (op, range) = match admissible(drawn, ranges[a], ranges[b]) {
                Some(range) => (drawn, range),
                None => (ElementaryOp::Sin, Interval { lo: -1.0, hi: 1.0 }),
            };
            ranges.push(range);
            steps.push(KernelStep { op, a, b });
        }
        Ok(Self {
            n_inputs,
            m_outputs,
            steps,
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn output_slots(&self) -> std::ops::Range<usize> {
        let total = self.n_inputs + self.steps.len();
        total - self.m_outputs..total
    }

    /// Plain floating-point evaluation.
    pub fn eval(&self, inputs: &[f64]) -> Vec<f64> {
        assert_eq!(inputs.len(), self.n_inputs);
        let mut pool = inputs.to_vec();
        for step in &self.steps {
            pool.push(step.op.primal(pool[step.a], pool[step.b]));
        }
        pool[self.output_slots()].to_vec()
    }

    /// Records the kernel on `tape` and returns its outputs.
    pub fn record(&self, tape: &mut Tape, inputs: &[ActiveValue]) -> Result<Vec<ActiveValue>> {
        assert_eq!(inputs.len(), self.n_inputs);
        let mut pool = inputs.to_vec();
        for step in &self.steps {
            let value = if step.op.arity() == 1 {
                tape.unary(step.op, pool[step.a])?
            } else {
                tape.binary(step.op, pool[step.a], pool[step.b])?
            };
            pool.push(value);
        }
        Ok(pool[self.output_slots()].to_vec())
    }
}

/// Seeded generator for one purpose of a workload; streams keep the kernel
/// structure, the shared values and each worker's values independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SHARED_STREAM: u64 = 1 << 62;
const WORKER_STREAM: u64 = 1 << 63;

/// One worker's tape with its recorded, not yet preaccumulated regions.
#[derive(Clone, Debug)]
pub struct WorkerTape {
    pub tape: Tape,
    pub regions: Vec<PreaccRegion>,
    /// Region inputs in declaration order: shared first, then private.
    pub inputs: Vec<Vec<ActiveValue>>,
    pub outputs: Vec<Vec<ActiveValue>>,
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub spec: WorkloadSpec,
    pub ids: Arc<IdentifierCounter>,
    /// Padding statements and the shared inputs.
    pub prelude: Tape,
    pub shared_inputs: Vec<ActiveValue>,
    /// Kernel of region `r`, identical on every worker.
    pub kernels: Vec<Kernel>,
    pub workers: Vec<WorkerTape>,
    pub record_time: Duration,
}

/// Records a workload.
///
/// The prelude tape holds `padding_statements` statements (an input followed
/// by a copy chain) and then the `s` shared inputs. Worker `t` then records,
/// per region, its `n - s` private inputs and the region itself.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let start = Instant::now();
    let ids = IdentifierCounter::new();
    let mut prelude = Tape::new(spec.threads, ids.clone());
    if spec.padding_statements > 0 {
        let mut v = prelude.register_input(1.0);
        for _ in 1..spec.padding_statements {
            v = prelude.copy(v)?;
        }
    }
    let mut shared_rng = stream_rng(spec.seed, SHARED_STREAM);
    let shared_inputs: Vec<ActiveValue> = (0..spec.shared_inputs)
        .map(|_| prelude.register_input(shared_rng.gen_range(INPUT_RANGE.0..INPUT_RANGE.1)))
        .collect();

    let kernels = (0..spec.regions_per_worker)
        .map(|r| {
            Kernel::generate(
                &mut stream_rng(spec.seed, r as u64),
                spec.n_inputs,
                spec.m_outputs,
                spec.chain_length,
                &spec.op_mix,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut workers = Vec::with_capacity(spec.threads);
    for t in 0..spec.threads {
        let mut values = stream_rng(spec.seed, WORKER_STREAM | t as u64);
        let mut tape = Tape::new(t, ids.clone());
        let (mut regions, mut region_inputs, mut region_outputs) =
            (Vec::new(), Vec::new(), Vec::new());
        for kernel in &kernels {
            let mut inputs = shared_inputs.clone();
            for _ in spec.shared_inputs..spec.n_inputs {
                inputs.push(tape.register_input(values.gen_range(INPUT_RANGE.0..INPUT_RANGE.1)));
            }
            let mut region = PreaccRegion::begin(&mut tape)?;
            for &input in &inputs {
                region.add_input(&tape, input)?;
            }
            let outputs = kernel.record(&mut tape, &inputs)?;
            for &output in &outputs {
                region.add_output(&tape, output)?;
            }
            region.end_recording(&mut tape)?;
            regions.push(region);
            region_inputs.push(inputs);
            region_outputs.push(outputs);
        }
        workers.push(WorkerTape {
            tape,
            regions,
            inputs: region_inputs,
            outputs: region_outputs,
        });
    }
    Ok(Workload {
        spec: spec.clone(),
        ids,
        prelude,
        shared_inputs,
        kernels,
        workers,
        record_time: start.elapsed(),
    })
}
