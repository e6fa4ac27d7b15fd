//! Forward and reverse sweeps over tape ranges, generic over the adjoint store.

use std::collections::HashSet;
use std::ops::Range;

use super::{Identifier, StatementRef, Tape};
use crate::error::{Error, Result};
use crate::stores::AdjointStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepOptions {
    /// Zero `adjoint[lhs]` after reading it. Switching this off is only
    /// useful to demonstrate what goes wrong on repeated evaluations.
    pub reset_lhs: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { reset_lhs: true }
    }
}

/// One reverse step: `a = adj[lhs]; adj[lhs] = 0; adj[rhs_i] += partial_i * a`.
///
/// Zero-arity statements (registered inputs) are leaves: their adjoint is
/// read but left in place, since it is the result of the sweep.
#[inline]
pub fn reverse_statement<S: AdjointStore + ?Sized>(
    statement: &StatementRef<'_>,
    store: &mut S,
    options: SweepOptions,
) -> Result<()> {
    if statement.arity() == 0 {
        store.get(statement.lhs)?;
        return Ok(());
    }
    let adjoint = if options.reset_lhs {
        store.take(statement.lhs)?
    } else {
        store.get(statement.lhs)?
    };
    for (&partial, &rhs) in statement.partials.iter().zip(statement.rhs) {
        store.add(rhs, partial * adjoint)?;
    }
    Ok(())
}

pub fn evaluate_reverse<S: AdjointStore + ?Sized>(
    tape: &Tape,
    range: Range<usize>,
    store: &mut S,
) -> Result<()> {
    evaluate_reverse_with(tape, range, store, SweepOptions::default())
}

pub fn evaluate_reverse_with<S: AdjointStore + ?Sized>(
    tape: &Tape,
    range: Range<usize>,
    store: &mut S,
    options: SweepOptions,
) -> Result<()> {
    tape.check_range(&range)?;
    for statement in tape.statements(range).rev() {
        reverse_statement(&statement, store, options)?;
    }
    Ok(())
}

/// Forward sweep: `tangent[lhs] = sum_i partial_i * tangent[rhs_i]`.
///
/// Leaves keep their tangent, which is where seeds live.
pub fn evaluate_forward<S: AdjointStore + ?Sized>(
    tape: &Tape,
    range: Range<usize>,
    store: &mut S,
) -> Result<()> {
    tape.check_range(&range)?;
    for statement in tape.statements(range) {
        if statement.arity() == 0 {
            continue;
        }
        let mut tangent = 0.0;
        for (&partial, &rhs) in statement.partials.iter().zip(statement.rhs) {
            tangent += partial * store.get(rhs)?;
        }
        store.set(statement.lhs, tangent)?;
    }
    Ok(())
}

/// Zeroes every identifier that occurs in `range`, on either side.
pub fn reset_range<S: AdjointStore + ?Sized>(
    tape: &Tape,
    range: Range<usize>,
    store: &mut S,
) -> Result<()> {
    tape.check_range(&range)?;
    for statement in tape.statements(range) {
        store.set(statement.lhs, 0.0)?;
        for &rhs in statement.rhs {
            store.set(rhs, 0.0)?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdentifierScan {
    pub min_id: Identifier,
    pub max_id: Identifier,
    pub distinct_count: usize,
}

/// Minimum, maximum and number of distinct identifiers of a range together
/// with `extra` identifiers (the region's declared inputs).
pub fn scan_identifiers(
    tape: &Tape,
    range: Range<usize>,
    extra: &[Identifier],
) -> Result<IdentifierScan> {
    tape.check_range(&range)?;
    if range.is_empty() && extra.is_empty() {
        return Err(Error::EmptyRange);
    }
    let mut seen = HashSet::new();
    let ids = tape
        .statements(range)
        .flat_map(|s| std::iter::once(s.lhs).chain(s.rhs.iter().copied()))
        .chain(extra.iter().copied());
    let mut min_id = Identifier(u32::MAX);
    let mut max_id = Identifier(0);
    for id in ids {
        min_id = min_id.min(id);
        max_id = max_id.max(id);
        seen.insert(id);
    }
    Ok(IdentifierScan {
        min_id,
        max_id,
        distinct_count: seen.len(),
    })
}
