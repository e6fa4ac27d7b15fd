//! Verification suite, benchmark sweep and race demonstration behind the
//! `preacc` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use preacc_core::harness::{
    enumerate_race, generate_workload, measure, reverse_all, run_simultaneous,
    simulate_race_seeded, RaceTrace, RunOptions, Workload, WorkloadSpec,
};
use preacc_core::{
    compute_jacobian, evaluate_reverse_with, AdjointStore, FullLocalVector, JacobianBlock,
    JacobianMode, Preaccumulator, Strategy, SweepOptions, Tape,
};
use serde::{Deserialize, Serialize};

/// A benchmark sweep: every strategy at every worker count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub workload: WorkloadSpec,
    pub strategies: Vec<Strategy>,
    #[serde(rename = "T_values")]
    pub t_values: Vec<usize>,
    pub repetitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            workload: WorkloadSpec::default(),
            strategies: Strategy::ALL.to_vec(),
            t_values: vec![1, 2, 4, 8],
            repetitions: 5,
            output_path: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            bail!("strategies must not be empty");
        }
        if self.t_values.is_empty() || self.t_values.contains(&0) {
            bail!("T_values must be a non-empty list of positive worker counts");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        self.workload.validate()?;
        Ok(())
    }

    /// Reads a sweep config, or a bare workload spec wrapped in the default sweep.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config = match serde_json::from_str::<SweepConfig>(&text) {
            Ok(config) => config,
            Err(sweep_err) => match serde_json::from_str::<WorkloadSpec>(&text) {
                Ok(workload) => SweepConfig {
                    workload,
                    ..SweepConfig::default()
                },
                Err(_) => {
                    return Err(sweep_err).with_context(|| format!("parsing {}", path.display()))
                }
            },
        };
        config
            .validate()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(config)
    }

    fn workload_at(&self, threads: usize) -> WorkloadSpec {
        WorkloadSpec {
            threads,
            ..self.workload.clone()
        }
    }
}

/// One line of the benchmark CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub strategy: Strategy,
    #[serde(rename = "T")]
    pub threads: usize,
    #[serde(rename = "L")]
    pub chain_length: usize,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub padding: usize,
    pub record_time_ns: u64,
    pub preacc_time_ns: u64,
    pub eval_time_ns: u64,
    pub live_slots: u64,
    pub peak_slots: u64,
    pub modeled_bytes: u64,
    pub allocation_events: u64,
    pub map_ops: u64,
    pub adjoint_accesses: u64,
    pub lock_acquisitions: u64,
}

pub const BENCH_COLUMNS: [&str; 17] = [
    "strategy",
    "T",
    "L",
    "n",
    "m",
    "s",
    "padding",
    "record_time_ns",
    "preacc_time_ns",
    "eval_time_ns",
    "live_slots",
    "peak_slots",
    "modeled_bytes",
    "allocation_events",
    "map_ops",
    "adjoint_accesses",
    "lock_acquisitions",
];

/// Runs the sweep, strategy-major then by worker count, and writes the CSV.
pub fn cmd_bench(config: &SweepConfig, out: &Path) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &strategy in &config.strategies {
        for &threads in &config.t_values {
            let spec = config.workload_at(threads);
            let m = measure(&spec, strategy, config.repetitions)
                .with_context(|| format!("measuring {strategy} at T={threads}"))?;
            rows.push(BenchRow {
                strategy,
                threads,
                chain_length: spec.chain_length,
                n: spec.n_inputs,
                m: spec.m_outputs,
                s: spec.shared_inputs,
                padding: spec.padding_statements,
                record_time_ns: m.record.mean_ns,
                preacc_time_ns: m.preacc.mean_ns,
                eval_time_ns: m.eval.mean_ns,
                live_slots: m.memory.live_slots,
                peak_slots: m.memory.peak_slots,
                modeled_bytes: m.memory.modeled_bytes,
                allocation_events: m.memory.allocation_events,
                map_ops: m.counters.map_ops,
                adjoint_accesses: m.counters.adjoint_accesses,
                lock_acquisitions: m.counters.lock_acquisitions,
            });
        }
    }
    let mut writer =
        csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    for row in &rows {
        writer
            .serialize(row)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    writer
        .flush()
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(rows)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Test hook: sweeps read `adj[lhs]` without zeroing it.
    pub disable_lhs_reset: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<String, String>) -> CheckResult {
    match outcome {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Finishes every region of every worker on one thread with `strategy`.
fn finish_serially(
    workload: &Workload,
    strategy: Strategy,
) -> preacc_core::Result<(Vec<Tape>, Vec<JacobianBlock>)> {
    let mut tapes = Vec::new();
    let mut jacobians = Vec::new();
    let mut context = Preaccumulator::standalone();
    for worker in &workload.workers {
        let mut tape = worker.tape.clone();
        let mut blocks = Vec::new();
        for region in worker.regions.iter().rev() {
            blocks.push(
                context
                    .finish(&mut tape, region.clone(), strategy)?
                    .jacobian,
            );
        }
        blocks.reverse();
        jacobians.extend(blocks);
        tapes.push(tape);
    }
    Ok((tapes, jacobians))
}

fn strategy_agreement(workload: &Workload) -> Result<String, String> {
    let (_, reference) = finish_serially(workload, Strategy::ALL[0]).map_err(|e| e.to_string())?;
    for strategy in &Strategy::ALL[1..] {
        let (_, blocks) = finish_serially(workload, *strategy).map_err(|e| e.to_string())?;
        if let Some(k) = (0..blocks.len()).find(|&k| !blocks[k].bit_identical(&reference[k])) {
            return Err(format!(
                "{strategy} differs from {} in region {k}",
                Strategy::ALL[0]
            ));
        }
    }
    Ok(format!(
        "{} regions, 8 strategies bit-identical",
        reference.len()
    ))
}

fn gradient(workload: &Workload, strategies: &[Strategy]) -> Result<String, String> {
    // reverse sweeps against central differences of the plain kernels
    let mut worst_fd: f64 = 0.0;
    for (kernel, inputs) in workload.kernels.iter().zip(&workload.workers[0].inputs) {
        let x: Vec<f64> = inputs.iter().map(|v| v.primal).collect();
        let mut tape = Tape::new(0, preacc_core::IdentifierCounter::new());
        let active: Vec<_> = x.iter().map(|&v| tape.register_input(v)).collect();
        let outputs = kernel
            .record(&mut tape, &active)
            .map_err(|e| e.to_string())?;
        for (j, out) in outputs.iter().enumerate() {
            let mut adj = FullLocalVector::sized(tape.identifiers().max_assigned());
            adj.set(out.id, 1.0).map_err(|e| e.to_string())?;
            preacc_core::evaluate_reverse(&tape, 0..tape.len(), &mut adj)
                .map_err(|e| e.to_string())?;
            for (i, input) in active.iter().enumerate() {
                let h = 1e-6 * x[i].abs().max(1.0);
                let (mut up, mut down) = (x.clone(), x.clone());
                up[i] += h;
                down[i] -= h;
                let fd = (kernel.eval(&up)[j] - kernel.eval(&down)[j]) / (2.0 * h);
                let err = rel_err(adj.get(input.id).map_err(|e| e.to_string())?, fd);
                worst_fd = worst_fd.max(err);
            }
        }
    }
    if worst_fd > 1e-6 {
        return Err(format!("finite-difference mismatch {worst_fd:.1e}"));
    }
    // preaccumulated tapes against the plain tapes
    let plain: Vec<Tape> = workload.workers.iter().map(|w| w.tape.clone()).collect();
    let reference = reverse_all(workload, &plain).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for &strategy in strategies {
        let (tapes, _) = finish_serially(workload, strategy).map_err(|e| e.to_string())?;
        let grad = reverse_all(workload, &tapes).map_err(|e| e.to_string())?;
        for (a, b) in grad.iter().zip(&reference) {
            worst = worst.max(rel_err(*a, *b));
        }
        if worst > 1e-12 {
            return Err(format!(
                "{strategy}: preaccumulated gradient off by {worst:.1e}"
            ));
        }
    }
    Ok(format!(
        "finite differences {worst_fd:.1e}, preaccumulated {worst:.1e}"
    ))
}

fn determinism(config: &SweepConfig) -> Result<String, String> {
    let options = RunOptions {
        compare_serial: true,
        ..RunOptions::default()
    };
    let mut runs = 0;
    for &threads in &config.t_values {
        let workload =
            generate_workload(&config.workload_at(threads)).map_err(|e| e.to_string())?;
        for strategy in config.strategies.iter().copied().filter(|s| s.is_local()) {
            let first =
                run_simultaneous(&workload, strategy, &options).map_err(|e| e.to_string())?;
            for _ in 0..3 {
                let again =
                    run_simultaneous(&workload, strategy, &options).map_err(|e| e.to_string())?;
                runs += 1;
                if again.mismatches != Some(0) || !again.same_jacobians(&first) {
                    return Err(format!("{strategy} at T={threads} is not reproducible"));
                }
            }
        }
    }
    Ok(format!(
        "{runs} repeated runs bit-identical to the serial reference"
    ))
}

fn race_simulator() -> Result<String, String> {
    let shared = enumerate_race(Strategy::SharedGlobal).map_err(|e| e.to_string())?;
    let contaminated = shared.iter().filter(|t| !t.is_correct()).count();
    if !shared.iter().any(|t| t.saw_sum()) {
        return Err("no interleaving reproduces the contaminated sum".into());
    }
    for strategy in Strategy::LOCAL {
        let traces = enumerate_race(strategy).map_err(|e| e.to_string())?;
        if let Some(bad) = traces.iter().find(|t| !t.is_correct()) {
            return Err(format!("{strategy} wrong under {}", bad.schedule_label()));
        }
    }
    Ok(format!(
        "shared storage wrong in {contaminated}/{} interleavings, local strategies never",
        shared.len()
    ))
}

/// Evaluates each region's Jacobian twice on one store without `reset_range`
/// in between; only the reset of `adj[lhs]` inside the sweep keeps the
/// second evaluation clean.
fn adjoint_reset(workload: &Workload, options: VerifyOptions) -> Result<String, String> {
    let sweep = SweepOptions {
        reset_lhs: !options.disable_lhs_reset,
    };
    let mut evaluations = 0;
    for worker in &workload.workers {
        for region in &worker.regions {
            let range = region.range().map_err(|e| e.to_string())?;
            let mut fresh = FullLocalVector::sized(workload.ids.max_assigned());
            let reference =
                compute_jacobian(&worker.tape, region, &mut fresh, JacobianMode::Reverse)
                    .map_err(|e| e.to_string())?;
            let mut store = FullLocalVector::sized(workload.ids.max_assigned());
            for repetition in 0..2 {
                for (row, output) in region.outputs().iter().enumerate() {
                    store.set(*output, 1.0).map_err(|e| e.to_string())?;
                    evaluate_reverse_with(&worker.tape, range.clone(), &mut store, sweep)
                        .map_err(|e| e.to_string())?;
                    for (col, input) in region.inputs().iter().enumerate() {
                        let entry = store.take(*input).map_err(|e| e.to_string())?;
                        if entry.to_bits() != reference.get(row, col).to_bits() {
                            return Err(format!(
                                "evaluation {} of output {output}: entry {entry} instead of {}",
                                repetition + 1,
                                reference.get(row, col)
                            ));
                        }
                    }
                    evaluations += 1;
                }
            }
        }
    }
    Ok(format!(
        "{evaluations} repeated reverse evaluations reproduce the Jacobian"
    ))
}

/// Runs all checks on the configured workload.
pub fn run_verify(config: &SweepConfig, options: VerifyOptions) -> Result<Vec<CheckResult>> {
    config.validate()?;
    let workload = generate_workload(&config.workload)?;
    Ok(vec![
        check("strategy-agreement", strategy_agreement(&workload)),
        check("gradient", gradient(&workload, &config.strategies)),
        check("determinism", determinism(config)),
        check("race-simulator", race_simulator()),
        check("adjoint-reset", adjoint_reset(&workload, options)),
    ])
}

/// Prints the pass/fail table; true iff every check passed.
pub fn cmd_verify(
    config: &SweepConfig,
    options: VerifyOptions,
    out: &mut impl Write,
) -> Result<bool> {
    let results = run_verify(config, options)?;
    for r in &results {
        writeln!(
            out,
            "{:<4}  {:<18}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        )?;
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        writeln!(out, "all {} checks passed", results.len())?;
    } else {
        writeln!(out, "failed: {}", failed.join(", "))?;
    }
    Ok(failed.is_empty())
}

fn step_action(trace: &RaceTrace, k: usize) -> String {
    format!("{:?}", trace.steps[k].kind).to_lowercase()
}

/// Local strategy shown next to the shared store in the demo.
pub const DEMO_LOCAL: Strategy = Strategy::HashMap;

/// Prints the two-region example step by step, or every interleaving.
pub fn cmd_race_demo(seed: u64, enumerate: bool, out: &mut impl Write) -> Result<()> {
    if enumerate {
        return race_enumeration(out);
    }
    let shared = simulate_race_seeded(Strategy::SharedGlobal, seed)?;
    let local = simulate_race_seeded(DEMO_LOCAL, seed)?;
    let (p1, p2) = shared.expected_separate;
    writeln!(
        out,
        "regions y1 = {p1:?}*u and y2 = {p2:?}*u share the input u"
    )?;
    writeln!(out, "schedule (seed {seed}): {}", shared.schedule_label())?;
    writeln!(
        out,
        "step  job  action    shared u\u{305}   {DEMO_LOCAL} u\u{305}"
    )?;
    for k in 0..shared.steps.len() {
        writeln!(
            out,
            "{:>4}  {:>3}  {:<8}  {:>9?}  {:>10?}",
            k + 1,
            shared.steps[k].job + 1,
            step_action(&shared, k),
            shared.steps[k].shared_cell,
            local.steps[k].shared_cell
        )?;
    }
    writeln!(
        out,
        "harvested: shared ({:?}, {:?}), local ({:?}, {:?})",
        shared.harvested[0], shared.harvested[1], local.harvested[0], local.harvested[1]
    )?;
    writeln!(
        out,
        "shared: {}; local: {}",
        shared.outcome(),
        local.outcome()
    )?;
    Ok(())
}

fn race_enumeration(out: &mut impl Write) -> Result<()> {
    let traces: Vec<Vec<RaceTrace>> = Strategy::ALL
        .iter()
        .map(|&s| enumerate_race(s))
        .collect::<preacc_core::Result<_>>()?;
    let columns: Vec<String> = Strategy::ALL.iter().map(|s| s.to_string()).collect();
    writeln!(out, "  #  schedule                 {}", columns.join("  "))?;
    for k in 0..traces[0].len() {
        let cells: Vec<String> = traces
            .iter()
            .zip(&columns)
            .map(|(t, name)| {
                let h = t[k].harvested;
                format!(
                    "{:<width$}",
                    format!("({:?},{:?})", h[0], h[1]),
                    width = name.len()
                )
            })
            .collect();
        writeln!(
            out,
            "{:>3}  {}  {}",
            k + 1,
            traces[0][k].schedule_label(),
            cells.join("  ").trim_end()
        )?;
    }
    for (strategy, t) in Strategy::ALL.iter().zip(&traces) {
        let wrong = t.iter().filter(|t| !t.is_correct()).count();
        let sums = t.iter().filter(|t| t.saw_sum()).count();
        writeln!(
            out,
            "{strategy}: {wrong}/{} interleavings wrong, {sums} saw the sum {:?}",
            t.len(),
            t[0].expected_separate.0 + t[0].expected_separate.1
        )?;
    }
    Ok(())
}
