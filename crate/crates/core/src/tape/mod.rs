//! Jacobian tape: statements with precomputed partials, addressed by identifiers.
//!
//! Every active value carries an [`Identifier`]. Identifiers come from one
//! [`IdentifierCounter`] shared by all workers and are never reused, so an
//! identifier names exactly one node of the global computational graph. Each
//! worker records onto its own [`Tape`]; a statement stores the identifier of
//! its left-hand side together with `(partial, rhs)` pairs. Identifier 0 is
//! reserved for passive data and never appears on a tape.

mod eval;
mod ops;

use std::fmt;
use std::ops::Range;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{
    evaluate_forward, evaluate_reverse, evaluate_reverse_with, reset_range, reverse_statement,
    scan_identifiers, IdentifierScan, SweepOptions,
};
pub use ops::ElementaryOp;

/// Virtual address of an active value in an adjoint store.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Identifier(pub u32);

impl Identifier {
    pub const PASSIVE: Identifier = Identifier(0);

    #[inline]
    pub fn is_passive(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Global source of identifiers, shared between workers.
#[derive(Debug, Default)]
pub struct IdentifierCounter {
    last: AtomicU32,
}

impl IdentifierCounter {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Hands out the next identifier; the first call returns 1.
    #[inline]
    pub fn next_id(&self) -> Identifier {
        Identifier(self.last.fetch_add(1, Ordering::Relaxed) + 1)
    }

    /// Largest identifier assigned so far (`i_max`); 0 if none.
    pub fn max_assigned(&self) -> Identifier {
        Identifier(self.last.load(Ordering::Relaxed))
    }
}

/// A primal value paired with its identifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveValue {
    pub primal: f64,
    pub id: Identifier,
}

impl ActiveValue {
    /// A constant that does not take part in differentiation.
    pub fn passive(primal: f64) -> Self {
        Self {
            primal,
            id: Identifier::PASSIVE,
        }
    }

    pub fn is_passive(&self) -> bool {
        self.id.is_passive()
    }
}

/// Statement count at some point of a recording.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TapePosition(pub usize);

impl TapePosition {
    pub fn range_to(self, end: TapePosition) -> Range<usize> {
        self.0..end.0
    }
}

/// Owned form of a statement, used for replacement and inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct Statement {
    pub lhs: Identifier,
    pub args: Vec<(f64, Identifier)>,
}

/// Borrowed view of a recorded statement.
#[derive(Clone, Copy, Debug)]
pub struct StatementRef<'a> {
    pub lhs: Identifier,
    pub partials: &'a [f64],
    pub rhs: &'a [Identifier],
}

impl StatementRef<'_> {
    #[inline]
    pub fn arity(&self) -> usize {
        self.rhs.len()
    }

    pub fn to_owned(&self) -> Statement {
        Statement {
            lhs: self.lhs,
            args: self
                .partials
                .iter()
                .copied()
                .zip(self.rhs.iter().copied())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Header {
    lhs: Identifier,
    args_end: usize,
}

/// Append-only Jacobian tape owned by one worker.
///
/// Arguments live in two flat arrays (`partials`, `rhs`); statement `i` owns
/// the slice between the previous statement's end and its own.
#[derive(Clone, Debug)]
pub struct Tape {
    owner: usize,
    ids: Arc<IdentifierCounter>,
    headers: Vec<Header>,
    partials: Vec<f64>,
    rhs: Vec<Identifier>,
    region_open: bool,
}

impl Tape {
    pub fn new(owner: usize, ids: Arc<IdentifierCounter>) -> Self {
        Self {
            owner,
            ids,
            headers: Vec::new(),
            partials: Vec::new(),
            rhs: Vec::new(),
            region_open: false,
        }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn identifiers(&self) -> &Arc<IdentifierCounter> {
        &self.ids
    }

    pub fn position(&self) -> TapePosition {
        TapePosition(self.headers.len())
    }

    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }

    /// Total number of recorded `(partial, rhs)` pairs in `range`.
    pub fn arg_count(&self, range: Range<usize>) -> usize {
        if range.is_empty() {
            return 0;
        }
        self.headers[range.end - 1].args_end - self.args_start(range.start)
    }

    #[inline]
    fn args_start(&self, index: usize) -> usize {
        if index == 0 {
            0
        } else {
            self.headers[index - 1].args_end
        }
    }

    #[inline]
    pub fn statement(&self, index: usize) -> StatementRef<'_> {
        let header = self.headers[index];
        let start = self.args_start(index);
        StatementRef {
            lhs: header.lhs,
            partials: &self.partials[start..header.args_end],
            rhs: &self.rhs[start..header.args_end],
        }
    }

    pub fn statements(
        &self,
        range: Range<usize>,
    ) -> impl DoubleEndedIterator<Item = StatementRef<'_>> {
        range.map(move |i| self.statement(i))
    }

    pub(crate) fn check_range(&self, range: &Range<usize>) -> Result<()> {
        if range.start > range.end || range.end > self.len() {
            return Err(Error::InvalidRange {
                start: range.start,
                end: range.end,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Registers an independent variable as a zero-arity statement.
    pub fn register_input(&mut self, primal: f64) -> ActiveValue {
        let id = self.ids.next_id();
        self.headers.push(Header {
            lhs: id,
            args_end: self.rhs.len(),
        });
        ActiveValue { primal, id }
    }

    /// Records `result = phi(inputs)` with the given partials `d phi / d input_i`.
    ///
    /// Passive inputs are dropped from the statement. A non-finite partial is
    /// rejected and nothing is recorded.
    pub fn record(
        &mut self,
        inputs: &[ActiveValue],
        primal: f64,
        partials: &[f64],
    ) -> Result<ActiveValue> {
        if inputs.len() != partials.len() {
            return Err(Error::ArityMismatch {
                inputs: inputs.len(),
                partials: partials.len(),
            });
        }
        if let Some((position, &partial)) =
            partials.iter().enumerate().find(|(_, p)| !p.is_finite())
        {
            return Err(Error::NonFinitePartial {
                lhs: Identifier(self.ids.max_assigned().0 + 1),
                position,
                partial,
            });
        }
        let lhs = self.ids.next_id();
        for (input, &partial) in inputs.iter().zip(partials) {
            if input.is_passive() {
                continue;
            }
            assert!(
                input.id < lhs,
                "argument {} not assigned before statement {}",
                input.id,
                lhs
            );
            self.partials.push(partial);
            self.rhs.push(input.id);
        }
        self.headers.push(Header {
            lhs,
            args_end: self.rhs.len(),
        });
        Ok(ActiveValue { primal, id: lhs })
    }

    pub(crate) fn region_open(&self) -> bool {
        self.region_open
    }

    pub(crate) fn set_region_open(&mut self, open: bool) {
        self.region_open = open;
    }

    /// Replaces the statements in `range` by `replacement`, keeping the tail.
    pub(crate) fn replace_range(&mut self, range: Range<usize>, replacement: &[Statement]) {
        let tail: Vec<Statement> = self
            .statements(range.end..self.len())
            .map(|s| s.to_owned())
            .collect();
        let args_start = self.args_start(range.start);
        self.headers.truncate(range.start);
        self.partials.truncate(args_start);
        self.rhs.truncate(args_start);
        for statement in replacement.iter().chain(tail.iter()) {
            self.push_owned(statement);
        }
    }

    fn push_owned(&mut self, statement: &Statement) {
        for &(partial, rhs) in &statement.args {
            self.partials.push(partial);
            self.rhs.push(rhs);
        }
        self.headers.push(Header {
            lhs: statement.lhs,
            args_end: self.rhs.len(),
        });
    }

    /// Rewrites every identifier in `range` in place. Within a statement the
    /// arguments are visited before the lhs.
    pub(crate) fn edit_identifiers(
        &mut self,
        range: Range<usize>,
        mut remap: impl FnMut(Identifier) -> Identifier,
    ) {
        for index in range {
            let start = self.args_start(index);
            let end = self.headers[index].args_end;
            for rhs in &mut self.rhs[start..end] {
                *rhs = remap(*rhs);
            }
            let header = &mut self.headers[index];
            header.lhs = remap(header.lhs);
        }
    }

    /// Line-oriented dump: `lhs <- (partial,rhs) ...`, partials with 17 significant digits.
    pub fn dump(&self, range: Range<usize>) -> String {
        let mut out = String::new();
        for statement in self.statements(range) {
            out.push_str(&format_statement(&statement));
            out.push('\n');
        }
        out
    }
}

fn format_statement(statement: &StatementRef<'_>) -> String {
    let mut line = format!("{} <-", statement.lhs);
    for (partial, rhs) in statement.partials.iter().zip(statement.rhs) {
        line.push_str(&format!(" ({partial:.16e},{rhs})"));
    }
    line
}

impl fmt::Display for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump(0..self.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh() -> Tape {
        Tape::new(0, IdentifierCounter::new())
    }

    #[test]
    fn first_input_gets_identifier_one() {
        let mut tape = fresh();
        let x = tape.register_input(3.0);
        assert_eq!(
            x,
            ActiveValue {
                primal: 3.0,
                id: Identifier(1)
            }
        );
        let y = tape.register_input(4.0);
        assert_eq!(y.id, Identifier(2));
        assert_eq!(tape.len(), 2);
        assert_eq!(tape.statement(0).arity(), 0);
    }

    #[test]
    fn nan_input_passes_through() {
        let mut tape = fresh();
        let x = tape.register_input(f64::NAN);
        assert!(x.primal.is_nan());
        assert_eq!(x.id, Identifier(1));
    }

    #[test]
    fn product_statement_layout() {
        let ids = IdentifierCounter::new();
        for _ in 0..4 {
            ids.next_id();
        }
        let mut tape = Tape::new(0, ids.clone());
        let u1 = tape.register_input(2.0);
        ids.next_id();
        let u2 = tape.register_input(3.0);
        assert_eq!((u1.id, u2.id), (Identifier(5), Identifier(7)));
        let w = tape.mul(u1, u2).unwrap();
        assert_eq!(w.primal, 6.0);
        assert_eq!(
            tape.statement(2).to_owned(),
            Statement {
                lhs: Identifier(8),
                args: vec![(3.0, Identifier(5)), (2.0, Identifier(7))],
            }
        );
    }

    #[test]
    fn sin_at_zero() {
        let mut tape = fresh();
        let u = tape.register_input(0.0);
        let w = tape.sin(u).unwrap();
        assert_eq!(w.primal, 0.0);
        assert_eq!(
            tape.statement(1).to_owned(),
            Statement {
                lhs: Identifier(2),
                args: vec![(1.0, Identifier(1))],
            }
        );
    }

    #[test]
    fn passive_argument_is_dropped() {
        let mut tape = fresh();
        let u = tape.register_input(1.5);
        let w = tape.add(u, ActiveValue::passive(2.0)).unwrap();
        assert_eq!(w.primal, 3.5);
        assert_eq!(tape.statement(1).to_owned().args, vec![(1.0, u.id)]);
    }

    #[test]
    fn non_finite_partial_is_rejected() {
        let mut tape = fresh();
        let u = tape.register_input(0.0);
        let err = tape.log(u).unwrap_err();
        assert!(matches!(err, Error::NonFinitePartial { .. }));
        assert_eq!(tape.len(), 1);
        let err = tape.record(&[u], 1.0, &[f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinitePartial { position: 0, .. }));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let mut tape = fresh();
        let u = tape.register_input(0.0);
        assert_eq!(
            tape.record(&[u], 1.0, &[1.0, 2.0]).unwrap_err(),
            Error::ArityMismatch {
                inputs: 1,
                partials: 2
            }
        );
    }

    #[test]
    fn copy_gets_fresh_identifier() {
        let mut tape = fresh();
        let u = tape.register_input(1.25);
        let c = tape.copy(u).unwrap();
        assert_ne!(c.id, u.id);
        assert_eq!(c.primal, u.primal);
        assert_eq!(tape.statement(1).to_owned().args, vec![(1.0, u.id)]);
    }

    #[test]
    fn dump_format() {
        let mut tape = fresh();
        let u1 = tape.register_input(2.0);
        let u2 = tape.register_input(3.0);
        tape.mul(u1, u2).unwrap();
        assert_eq!(
            tape.to_string(),
            "1 <-\n2 <-\n3 <- (3.0000000000000000e0,1) (2.0000000000000000e0,2)\n"
        );
    }

    #[test]
    fn replace_range_keeps_tail() {
        let mut tape = fresh();
        let x = tape.register_input(1.0);
        let a = tape.sin(x).unwrap();
        let b = tape.cos(a).unwrap();
        let c = tape.exp(x).unwrap();
        tape.replace_range(
            1..3,
            &[Statement {
                lhs: b.id,
                args: vec![(0.5, x.id)],
            }],
        );
        assert_eq!(tape.len(), 3);
        assert_eq!(tape.statement(1).to_owned().args, vec![(0.5, x.id)]);
        assert_eq!(tape.statement(2).lhs, c.id);
        assert_eq!(tape.statement(2).rhs, &[x.id]);
        assert_eq!(tape.arg_count(0..3), 2);
    }
}
