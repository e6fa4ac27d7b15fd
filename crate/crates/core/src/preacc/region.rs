use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tape::{ActiveValue, Identifier, Tape, TapePosition};

/// Remapped counterparts of a region's declared inputs and outputs.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct EditedIds {
    pub inputs: Vec<Identifier>,
    pub outputs: Vec<Identifier>,
}

/// A marked tape range with ordered inputs and outputs.
///
/// Jacobian columns follow the input order and rows the output order.
#[derive(Clone, Debug, PartialEq)]
pub struct PreaccRegion {
    owner: usize,
    start: TapePosition,
    end: Option<TapePosition>,
    inputs: Vec<Identifier>,
    outputs: Vec<Identifier>,
    pub(crate) edited: Option<EditedIds>,
}

impl PreaccRegion {
    /// Opens a region at the current tape position. Regions do not nest.
    pub fn begin(tape: &mut Tape) -> Result<Self> {
        if tape.region_open() {
            return Err(Error::NestedRegion {
                owner: tape.owner(),
            });
        }
        tape.set_region_open(true);
        Ok(Self {
            owner: tape.owner(),
            start: tape.position(),
            end: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            edited: None,
        })
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn start(&self) -> TapePosition {
        self.start
    }

    pub fn end(&self) -> Option<TapePosition> {
        self.end
    }

    pub fn is_closed(&self) -> bool {
        self.end.is_some()
    }

    /// Statement range of a closed region.
    pub fn range(&self) -> Result<Range<usize>> {
        self.end
            .map(|end| self.start.range_to(end))
            .ok_or(Error::InvalidRange {
                start: self.start.0,
                end: self.start.0,
                len: self.start.0,
            })
    }

    pub fn inputs(&self) -> &[Identifier] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Identifier] {
        &self.outputs
    }

    /// Identifiers the Jacobian sweeps address: remapped ones after tape editing.
    pub(crate) fn sweep_ids(&self) -> (&[Identifier], &[Identifier]) {
        match &self.edited {
            Some(edited) => (&edited.inputs, &edited.outputs),
            None => (&self.inputs, &self.outputs),
        }
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.owner() != self.owner {
            return Err(Error::ForeignTape {
                expected: self.owner,
                actual: tape.owner(),
            });
        }
        if self.end.is_some() {
            return Err(Error::RegionClosed);
        }
        Ok(())
    }

    fn assigned_inside(&self, tape: &Tape, id: Identifier) -> bool {
        tape.statements(self.start.0..tape.len())
            .rev()
            .any(|s| s.lhs == id)
    }

    pub fn add_input(&mut self, tape: &Tape, value: ActiveValue) -> Result<()> {
        self.check_tape(tape)?;
        let id = value.id;
        if id.is_passive() {
            return Err(Error::PassiveIdentifier { role: "input" });
        }
        if self.inputs.contains(&id) {
            return Err(Error::DuplicateIdentifier { id, role: "input" });
        }
        if self.assigned_inside(tape, id) {
            return Err(Error::InputInsideRegion { id });
        }
        self.inputs.push(id);
        Ok(())
    }

    /// Declares an output. It must be assigned inside the region or be one of
    /// the declared inputs (a pass-through).
    pub fn add_output(&mut self, tape: &Tape, value: ActiveValue) -> Result<()> {
        self.check_tape(tape)?;
        let id = value.id;
        if id.is_passive() {
            return Err(Error::PassiveIdentifier { role: "output" });
        }
        if self.outputs.contains(&id) {
            return Err(Error::DuplicateIdentifier { id, role: "output" });
        }
        if !self.inputs.contains(&id) && !self.assigned_inside(tape, id) {
            return Err(Error::OutputOutsideRegion { id });
        }
        self.outputs.push(id);
        Ok(())
    }

    /// Closes the region at the current tape position.
    pub fn end_recording(&mut self, tape: &mut Tape) -> Result<()> {
        self.check_tape(tape)?;
        self.end = Some(tape.position());
        tape.set_region_open(false);
        Ok(())
    }
}

/// Ways a region can break the admissibility rules for preaccumulation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// A region statement reads an identifier that is neither a declared
    /// input nor assigned inside the region.
    UndeclaredExternalRead { statement: usize, id: Identifier },
    /// A statement outside the region reads a region intermediate.
    IntermediateEscapes { statement: usize, id: Identifier },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::UndeclaredExternalRead { .. } => "undeclared external read",
            Violation::IntermediateEscapes { .. } => "intermediate escapes region",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UndeclaredExternalRead { statement, id }
            | Violation::IntermediateEscapes { statement, id } => {
                write!(
                    f,
                    "{}: identifier {id} at statement {statement}",
                    self.kind()
                )
            }
        }
    }
}

/// Full-tape admissibility check of a closed region.
pub fn validate_region(tape: &Tape, region: &PreaccRegion) -> Result<Vec<Violation>> {
    let range = region.range()?;
    tape.check_range(&range)?;
    let assigned: HashSet<Identifier> = tape.statements(range.clone()).map(|s| s.lhs).collect();
    let inputs: HashSet<Identifier> = region.inputs.iter().copied().collect();
    let outputs: HashSet<Identifier> = region.outputs.iter().copied().collect();

    let mut violations = Vec::new();
    for (index, statement) in range.clone().zip(tape.statements(range.clone())) {
        for &rhs in statement.rhs {
            if !assigned.contains(&rhs) && !inputs.contains(&rhs) {
                violations.push(Violation::UndeclaredExternalRead {
                    statement: index,
                    id: rhs,
                });
            }
        }
    }
    let outside = (0..range.start).chain(range.end..tape.len());
    for index in outside {
        for &rhs in tape.statement(index).rhs {
            if assigned.contains(&rhs) && !outputs.contains(&rhs) {
                violations.push(Violation::IntermediateEscapes {
                    statement: index,
                    id: rhs,
                });
            }
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::IdentifierCounter;

    fn tape_with_statements(count: usize) -> Tape {
        let mut tape = Tape::new(0, IdentifierCounter::new());
        let mut v = tape.register_input(0.5);
        for _ in 1..count {
            v = tape.sin(v).unwrap();
        }
        tape
    }

    #[test]
    fn begin_records_position() {
        let mut tape = tape_with_statements(10);
        let region = PreaccRegion::begin(&mut tape).unwrap();
        assert_eq!(region.start(), TapePosition(10));
    }

    #[test]
    fn nested_begin_is_rejected() {
        let mut tape = tape_with_statements(1);
        let mut region = PreaccRegion::begin(&mut tape).unwrap();
        assert_eq!(
            PreaccRegion::begin(&mut tape),
            Err(Error::NestedRegion { owner: 0 })
        );
        region.end_recording(&mut tape).unwrap();
        assert!(PreaccRegion::begin(&mut tape).is_ok());
    }

    #[test]
    fn input_and_output_declarations() {
        let mut tape = Tape::new(0, IdentifierCounter::new());
        let before = tape.register_input(1.0);
        let x = tape.register_input(2.0);
        let mut region = PreaccRegion::begin(&mut tape).unwrap();
        region.add_input(&tape, x).unwrap();
        assert_eq!(
            region.add_input(&tape, x),
            Err(Error::DuplicateIdentifier {
                id: x.id,
                role: "input"
            })
        );
        assert_eq!(
            region.add_input(&tape, ActiveValue::passive(1.0)),
            Err(Error::PassiveIdentifier { role: "input" })
        );
        let y = tape.sin(x).unwrap();
        assert_eq!(
            region.add_input(&tape, y),
            Err(Error::InputInsideRegion { id: y.id })
        );
        assert_eq!(
            region.add_output(&tape, before),
            Err(Error::OutputOutsideRegion { id: before.id })
        );
        region.add_output(&tape, y).unwrap();
        assert!(region.add_output(&tape, y).is_err());
        region.end_recording(&mut tape).unwrap();
        assert_eq!(region.add_output(&tape, y), Err(Error::RegionClosed));
    }

    #[test]
    fn column_order_follows_declaration() {
        let mut tape = Tape::new(0, IdentifierCounter::new());
        let ids: Vec<_> = (0..8).map(|i| tape.register_input(i as f64)).collect();
        let mut region = PreaccRegion::begin(&mut tape).unwrap();
        region.add_input(&tape, ids[2]).unwrap();
        region.add_input(&tape, ids[6]).unwrap();
        assert_eq!(region.inputs(), &[Identifier(3), Identifier(7)]);
    }

    #[test]
    fn validation_reports() {
        let mut tape = Tape::new(0, IdentifierCounter::new());
        let x = tape.register_input(0.5);
        let hidden = tape.register_input(0.7);
        let mut region = PreaccRegion::begin(&mut tape).unwrap();
        region.add_input(&tape, x).unwrap();
        let a = tape.sin(x).unwrap();
        let b = tape.cos(a).unwrap();
        region.add_output(&tape, b).unwrap();
        region.end_recording(&mut tape).unwrap();
        assert!(validate_region(&tape, &region).unwrap().is_empty());

        // later statement reads the intermediate `a`
        tape.exp(a).unwrap();
        let report = validate_region(&tape, &region).unwrap();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind(), "intermediate escapes region");

        let mut second = PreaccRegion::begin(&mut tape).unwrap();
        second.add_input(&tape, x).unwrap();
        let c = tape.mul(x, hidden).unwrap();
        second.add_output(&tape, c).unwrap();
        second.end_recording(&mut tape).unwrap();
        let report = validate_region(&tape, &second).unwrap();
        assert_eq!(
            report,
            vec![Violation::UndeclaredExternalRead {
                statement: 5,
                id: hidden.id
            }]
        );
        assert_eq!(report[0].kind(), "undeclared external read");
    }
}
