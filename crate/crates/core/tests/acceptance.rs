//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use preacc_core::harness::{
    enumerate_race, generate_workload, run_simultaneous, stream_rng, uniform_op_mix, Kernel,
    RunOptions, WorkloadSpec,
};
use preacc_core::{
    compute_jacobian, evaluate_reverse, remap_and_edit, scan_identifiers, ActiveValue,
    AdjointStore, FullLocalVector, Identifier, IdentifierCounter, JacobianMode, MapKind,
    OrderedMapStore, PreaccRegion, Preaccumulator, Strategy, Tape,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

/// Reverse gradient of every output of a tape with respect to `inputs`.
fn reverse_jacobian(tape: &Tape, inputs: &[ActiveValue], outputs: &[ActiveValue]) -> Vec<Vec<f64>> {
    outputs
        .iter()
        .map(|out| {
            let mut adj = FullLocalVector::sized(tape.identifiers().max_assigned());
            adj.set(out.id, 1.0).unwrap();
            evaluate_reverse(tape, 0..tape.len(), &mut adj).unwrap();
            inputs.iter().map(|x| adj.get(x.id).unwrap()).collect()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = stream_rng(1000 + seed, 0);
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=3);
        let l = rng.gen_range(m..=200);
        let kernel = Kernel::generate(&mut rng, n, m, l, &uniform_op_mix()).map_err(fail)?;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();

        let mut tape = Tape::new(0, IdentifierCounter::new());
        let inputs: Vec<ActiveValue> = x.iter().map(|&v| tape.register_input(v)).collect();
        let outputs = kernel.record(&mut tape, &inputs).map_err(fail)?;
        let gradient = reverse_jacobian(&tape, &inputs, &outputs);

        for i in 0..n {
            let h = 1e-6 * x[i].abs().max(1.0);
            let (mut up, mut down) = (x.clone(), x.clone());
            up[i] += h;
            down[i] -= h;
            let (fu, fd) = (kernel.eval(&up), kernel.eval(&down));
            for j in 0..m {
                let fd_entry = (fu[j] - fd[j]) / (2.0 * h);
                let err = rel_err(gradient[j][i], fd_entry);
                worst = worst.max(err);
                ensure(err <= 1e-6, || {
                    format!(
                        "seed {seed} (L={l}, n={n}, m={m}) output {j} input {i}: reverse {} vs fd {fd_entry}",
                        gradient[j][i]
                    )
                })?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "100 programs, worst relative error {worst:.1e}, {elapsed:.2?}"
    ))
}

/// Program: pre kernel on the inputs, a region kernel on its results, and a
/// post kernel reading the region outputs plus the first input.
struct RegionProgram {
    tape: Tape,
    region: PreaccRegion,
    inputs: Vec<ActiveValue>,
    outputs: Vec<ActiveValue>,
}

/// `1 + sin(v) / 2`, which lands in the kernel generator's input range.
fn squash(tape: &mut Tape, v: ActiveValue) -> ActiveValue {
    let s = tape.sin(v).unwrap();
    let t = tape.mul(s, ActiveValue::passive(0.5)).unwrap();
    tape.add(t, ActiveValue::passive(1.0)).unwrap()
}

fn region_program(seed: u64) -> Result<RegionProgram, String> {
    let mut rng = stream_rng(5000 + seed, 0);
    let mix = uniform_op_mix();
    let n = rng.gen_range(1..=4);
    let a = rng.gen_range(1..=4);
    let b = rng.gen_range(1..=3);
    let lengths = [
        rng.gen_range(a..=30),
        rng.gen_range(b..=60),
        rng.gen_range(2..=30),
    ];
    let pre = Kernel::generate(&mut rng, n, a, lengths[0], &mix).map_err(fail)?;
    let body = Kernel::generate(&mut rng, a, b, lengths[1], &mix).map_err(fail)?;
    let post = Kernel::generate(&mut rng, b + 1, 2, lengths[2], &mix).map_err(fail)?;

    let mut tape = Tape::new(0, IdentifierCounter::new());
    let inputs: Vec<ActiveValue> = (0..n)
        .map(|_| tape.register_input(rng.gen_range(0.5..1.5)))
        .collect();
    let mids: Vec<ActiveValue> = pre
        .record(&mut tape, &inputs)
        .map_err(fail)?
        .into_iter()
        .map(|v| squash(&mut tape, v))
        .collect();
    let mut region = PreaccRegion::begin(&mut tape).map_err(fail)?;
    for &v in &mids {
        region.add_input(&tape, v).map_err(fail)?;
    }
    let region_out = body.record(&mut tape, &mids).map_err(fail)?;
    for &v in &region_out {
        region.add_output(&tape, v).map_err(fail)?;
    }
    region.end_recording(&mut tape).map_err(fail)?;
    let mut post_in = region_out.clone();
    post_in.push(inputs[0]);
    let post_in: Vec<ActiveValue> = post_in.into_iter().map(|v| squash(&mut tape, v)).collect();
    let outputs = post.record(&mut tape, &post_in).map_err(fail)?;
    Ok(RegionProgram {
        tape,
        region,
        inputs,
        outputs,
    })
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let program = region_program(seed)?;
        let reference = reverse_jacobian(&program.tape, &program.inputs, &program.outputs);
        let mut first: Option<(Strategy, Vec<Vec<f64>>, preacc_core::JacobianBlock)> = None;
        for strategy in Strategy::ALL {
            let mut tape = program.tape.clone();
            let report = Preaccumulator::standalone()
                .finish(&mut tape, program.region.clone(), strategy)
                .map_err(fail)?;
            let gradient = reverse_jacobian(&tape, &program.inputs, &program.outputs);
            for (row, ref_row) in gradient.iter().zip(&reference) {
                for (&g, &r) in row.iter().zip(ref_row) {
                    let err = rel_err(g, r);
                    worst = worst.max(err);
                    ensure(err <= 1e-12, || {
                        format!("seed {seed} {strategy}: gradient {g} vs plain {r}")
                    })?;
                }
            }
            match &first {
                None => first = Some((strategy, gradient, report.jacobian)),
                Some((s0, g0, j0)) => {
                    ensure(j0.bit_identical(&report.jacobian), || {
                        format!("seed {seed}: {strategy} Jacobian differs from {s0}")
                    })?;
                    let same = g0
                        .iter()
                        .flatten()
                        .zip(gradient.iter().flatten())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                    ensure(same, || {
                        format!("seed {seed}: {strategy} gradient differs from {s0}")
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "50 programs x 8 strategies, worst relative error {worst:.1e}, strategies bit-identical"
    ))
}

fn criterion_3() -> Outcome {
    let spec = WorkloadSpec {
        threads: 8,
        regions_per_worker: 3,
        chain_length: 40,
        n_inputs: 4,
        m_outputs: 2,
        shared_inputs: 2,
        seed: 11,
        padding_statements: 1000,
        ..WorkloadSpec::default()
    };
    let workload = generate_workload(&spec).map_err(fail)?;
    let options = RunOptions {
        compare_serial: true,
        ..RunOptions::default()
    };
    for strategy in Strategy::LOCAL {
        let first = run_simultaneous(&workload, strategy, &options).map_err(fail)?;
        for run in 0..20 {
            let result = if run == 0 {
                first.clone()
            } else {
                run_simultaneous(&workload, strategy, &options).map_err(fail)?
            };
            ensure(result.mismatches == Some(0), || {
                format!(
                    "{strategy} run {run}: {:?} regions differ from serial",
                    result.mismatches
                )
            })?;
            ensure(result.same_jacobians(&first), || {
                format!("{strategy} run {run} differs from run 0")
            })?;
        }
    }
    Ok("6 local strategies x 20 runs at T=8, s=2 bit-identical to serial".into())
}

fn criterion_4() -> Outcome {
    let shared = enumerate_race(Strategy::SharedGlobal).map_err(fail)?;
    let contaminated = shared
        .iter()
        .filter(|t| t.saw_sum() && !t.is_correct())
        .count();
    ensure(contaminated >= 1, || {
        "no schedule produced the contaminated sum".into()
    })?;
    let example = shared.iter().find(|t| t.saw_sum()).unwrap();
    ensure(example.observed == 7.0, || {
        format!("observed {}", example.observed)
    })?;
    for strategy in Strategy::LOCAL {
        let traces = enumerate_race(strategy).map_err(fail)?;
        if let Some(bad) = traces.iter().find(|t| !t.is_correct()) {
            return Err(format!("{strategy} wrong under {}", bad.schedule_label()));
        }
    }
    Ok(format!(
        "{contaminated}/{} schedules give 7.0 on shared storage; local strategies correct on all",
        shared.len()
    ))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let spec = |padding| WorkloadSpec {
        threads: 8,
        regions_per_worker: 1,
        chain_length: 98,
        n_inputs: 2,
        m_outputs: 1,
        shared_inputs: 1,
        seed: 3,
        padding_statements: padding,
        ..WorkloadSpec::default()
    };
    let small = generate_workload(&spec(1_000)).map_err(fail)?;
    let large = generate_workload(&spec(1_000_000)).map_err(fail)?;
    let peak = |workload, strategy| {
        run_simultaneous(workload, strategy, &RunOptions::default()).map(|r| r.memory.peak_slots)
    };
    let mut map_peaks = Vec::new();
    for strategy in [
        Strategy::OrderedMap,
        Strategy::HashMap,
        Strategy::RemapOrdered,
        Strategy::RemapHashed,
    ] {
        let (a, b) = (
            peak(&small, strategy).map_err(fail)?,
            peak(&large, strategy).map_err(fail)?,
        );
        ensure(a == b, || format!("{strategy}: peak {a} -> {b}"))?;
        map_peaks.push(format!("{strategy} {a}"));
    }
    let (a, b) = (
        peak(&small, Strategy::FullVector).map_err(fail)?,
        peak(&large, Strategy::FullVector).map_err(fail)?,
    );
    let ratio = b as f64 / a as f64;
    ensure(ratio >= 500.0, || {
        format!("full_vector grew {a} -> {b} ({ratio:.0}x)")
    })?;
    ensure(b >= 8 * 1_000_001, || {
        format!("full_vector cumulative peak {b}")
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "map peaks unchanged ({}), full_vector {a} -> {b} ({ratio:.0}x), {elapsed:.2?}",
        map_peaks.join(", ")
    ))
}

/// A random region behind a random amount of padding.
fn random_region(seed: u64, n: usize, m: usize) -> Result<(Tape, PreaccRegion), String> {
    let mut rng = stream_rng(9000 + seed, 0);
    let ids = IdentifierCounter::new();
    let mut tape = Tape::new(0, ids.clone());
    let padding = rng.gen_range(0..2000);
    for _ in 0..padding {
        ids.next_id();
    }
    let l = rng.gen_range(m.max(4)..=120);
    let kernel = Kernel::generate(&mut rng, n, m, l, &uniform_op_mix()).map_err(fail)?;
    let inputs: Vec<ActiveValue> = (0..n)
        .map(|_| tape.register_input(rng.gen_range(0.5..1.5)))
        .collect();
    let mut region = PreaccRegion::begin(&mut tape).map_err(fail)?;
    for &v in &inputs {
        region.add_input(&tape, v).map_err(fail)?;
    }
    for v in kernel.record(&mut tape, &inputs).map_err(fail)? {
        region.add_output(&tape, v).map_err(fail)?;
    }
    region.end_recording(&mut tape).map_err(fail)?;
    Ok((tape, region))
}

fn seeded_shape(seed: u64) -> (usize, usize) {
    let mut rng = stream_rng(seed, 1);
    (rng.gen_range(1..=5), rng.gen_range(1..=3))
}

fn criterion_6() -> Outcome {
    for seed in 0..50u64 {
        let (n, m) = seeded_shape(seed);
        let (mut tape, region) = random_region(seed, n, m)?;
        let scan = scan_identifiers(&tape, region.range().map_err(fail)?, region.inputs())
            .map_err(fail)?;
        let report = Preaccumulator::standalone()
            .finish(&mut tape, region, Strategy::OffsetVector)
            .map_err(fail)?;
        let expected = (scan.max_id.0 - scan.min_id.0 + 1) as u64;
        ensure(report.memory.peak_slots == expected, || {
            format!(
                "seed {seed}: peak {} vs window {expected}",
                report.memory.peak_slots
            )
        })?;
    }
    Ok("50 regions, offset peak equals max - min + 1".into())
}

fn criterion_7() -> Outcome {
    for seed in 0..50u64 {
        let (n, m) = seeded_shape(seed);
        let (tape, region) = random_region(seed, n, m)?;
        let range = region.range().map_err(fail)?;
        let before = scan_identifiers(&tape, range.clone(), region.inputs()).map_err(fail)?;
        let mut mapped = OrderedMapStore::new();
        let unedited =
            compute_jacobian(&tape, &region, &mut mapped, JacobianMode::Auto).map_err(fail)?;
        for kind in [MapKind::Ordered, MapKind::Hashed] {
            let (mut edited_tape, mut edited) = (tape.clone(), region.clone());
            remap_and_edit(&mut edited_tape, &mut edited, kind).map_err(fail)?;
            let after = scan_identifiers(&edited_tape, range.clone(), &[]).map_err(fail)?;
            ensure(after.max_id.index() == before.distinct_count, || {
                format!(
                    "seed {seed}: max {} vs distinct {}",
                    after.max_id, before.distinct_count
                )
            })?;
            let mut dense = FullLocalVector::sized(Identifier(before.distinct_count as u32));
            ensure(dense.len() == before.distinct_count + 1, || {
                "dense size".into()
            })?;
            let jacobian = compute_jacobian(&edited_tape, &edited, &mut dense, JacobianMode::Auto)
                .map_err(fail)?;
            ensure(jacobian.bit_identical(&unedited), || {
                format!("seed {seed} {kind:?}: edited Jacobian differs")
            })?;
        }
    }
    Ok("50 regions contiguous after editing, Jacobians bit-identical".into())
}

fn criterion_8() -> Outcome {
    let mut totals = [0u64; 4];
    for seed in 0..20u64 {
        let (tape, region) = random_region(seed, 4, 4)?;
        let ops = |strategy| -> Result<u64, String> {
            let mut tape = tape.clone();
            Preaccumulator::standalone()
                .finish(&mut tape, region.clone(), strategy)
                .map(|r| r.counters.map_ops)
                .map_err(fail)
        };
        let counts = [
            ops(Strategy::RemapOrdered)?,
            ops(Strategy::OrderedMap)?,
            ops(Strategy::RemapHashed)?,
            ops(Strategy::HashMap)?,
        ];
        ensure(counts[0] <= counts[1], || {
            format!(
                "seed {seed}: remap_ordered {} > ordered_map {}",
                counts[0], counts[1]
            )
        })?;
        ensure(counts[2] <= counts[3], || {
            format!(
                "seed {seed}: remap_hashed {} > hash_map {}",
                counts[2], counts[3]
            )
        })?;
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
    }
    Ok(format!(
        "20 regions n=m=4: map ops remap_ordered {} <= ordered_map {}, remap_hashed {} <= hash_map {}",
        totals[0], totals[1], totals[2], totals[3]
    ))
}

fn criterion_9() -> Outcome {
    for strategy in Strategy::ALL {
        let mut tape = Tape::new(0, IdentifierCounter::new());
        let x = tape.register_input(0.7);
        let mut region = PreaccRegion::begin(&mut tape).map_err(fail)?;
        region.add_input(&tape, x).map_err(fail)?;
        let mut v = x;
        for k in 0..50 {
            v = if k % 2 == 0 { tape.sin(v) } else { tape.cos(v) }.map_err(fail)?;
        }
        region.add_output(&tape, v).map_err(fail)?;
        region.end_recording(&mut tape).map_err(fail)?;
        let range = region.range().map_err(fail)?;
        let before = (range.len(), tape.arg_count(range.clone()));
        let report = Preaccumulator::standalone()
            .finish(&mut tape, region, strategy)
            .map_err(fail)?;
        let after = (
            report.replacement.len(),
            tape.arg_count(report.replacement.clone()),
        );
        ensure(before == (50, 50) && after == (1, 1), || {
            format!("{strategy}: {before:?} -> {after:?}")
        })?;
    }
    Ok("chain of 50: 50 statements / 50 arguments -> 1 / 1 under all strategies".into())
}

fn criterion_10() -> Outcome {
    let mut lines = Vec::new();
    for strategy in Strategy::ALL {
        let (mut tape, region) = random_region(1, 2, 2)?;
        let report = Preaccumulator::standalone()
            .finish(&mut tape, region, strategy)
            .map_err(fail)?;
        let locks = report.counters.lock_acquisitions;
        if strategy.is_shared() {
            ensure(locks >= 1, || {
                format!("{strategy}: {locks} lock acquisitions")
            })?;
            lines.push(format!("{strategy} {locks}"));
        } else {
            ensure(locks == 0, || {
                format!("{strategy}: {locks} lock acquisitions")
            })?;
        }
    }
    let spec = WorkloadSpec {
        threads: 4,
        ..WorkloadSpec::default()
    };
    let workload = generate_workload(&spec).map_err(fail)?;
    for strategy in Strategy::ALL {
        let result = run_simultaneous(&workload, strategy, &RunOptions::default()).map_err(fail)?;
        let locks = result.counters.lock_acquisitions;
        let ok = if strategy.is_shared() {
            locks >= 4
        } else {
            locks == 0
        };
        ensure(ok, || {
            format!("{strategy} at T=4: {locks} lock acquisitions")
        })?;
    }
    Ok(format!(
        "per finish: {}; local strategies 0",
        lines.join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("gradient oracle", criterion_1),
        ("preaccumulation equivalence", criterion_2),
        ("determinism under sharing", criterion_3),
        ("race reproduction", criterion_4),
        ("memory scaling", criterion_5),
        ("offset sizing", criterion_6),
        ("tape-editing contiguity", criterion_7),
        ("preprocessing advantage", criterion_8),
        ("tape shrinkage", criterion_9),
        ("lock accounting", criterion_10),
    ];
    let mut failed = 0;
    for (index, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", index + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail}", index + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
