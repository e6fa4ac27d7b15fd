use std::io;

use serde::{Deserialize, Serialize};

use super::PreaccRegion;
use crate::error::Result;
use crate::stores::AdjointStore;
use crate::tape::{evaluate_forward, evaluate_reverse, reset_range, Identifier, Tape};

/// Sweep direction used to assemble a Jacobian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Reverse unless there are fewer inputs than outputs.
    #[default]
    Auto,
    Forward,
    Reverse,
}

impl JacobianMode {
    /// Picks the concrete direction for `n` inputs and `m` outputs.
    pub fn resolve(self, n: usize, m: usize) -> JacobianMode {
        match self {
            JacobianMode::Auto if n < m => JacobianMode::Forward,
            JacobianMode::Auto => JacobianMode::Reverse,
            other => other,
        }
    }
}

/// Dense `m x n` Jacobian, rows ordered like the outputs, columns like the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianBlock {
    pub inputs: Vec<Identifier>,
    pub outputs: Vec<Identifier>,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

#[derive(Serialize)]
struct EntryRow {
    output_id: Identifier,
    input_id: Identifier,
    entry: f64,
}

impl JacobianBlock {
    pub fn zeros(inputs: Vec<Identifier>, outputs: Vec<Identifier>) -> Self {
        let entries = vec![0.0; inputs.len() * outputs.len()];
        Self {
            inputs,
            outputs,
            entries,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.inputs.len() + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let n = self.inputs.len();
        self.entries[row * n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.inputs.len();
        &self.entries[row * n..(row + 1) * n]
    }

    /// Bitwise comparison of entries, so that `-0.0` and `NaN` are handled exactly.
    pub fn bit_identical(&self, other: &JacobianBlock) -> bool {
        self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// CSV dump with columns `output_id,input_id,entry`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for (row, &output_id) in self.outputs.iter().enumerate() {
            for (col, &input_id) in self.inputs.iter().enumerate() {
                csv.serialize(EntryRow {
                    output_id,
                    input_id,
                    entry: self.get(row, col),
                })?;
            }
        }
        csv.flush()?;
        Ok(())
    }
}

/// Assembles the Jacobian of a closed region with unit-seed sweeps on `store`.
///
/// Reverse mode runs one sweep per output, forward mode one per input. Each
/// sweep is followed by `reset_range`, and seeds and harvested cells are reset
/// too, so the store holds zeros for every region identifier afterwards.
pub fn compute_jacobian<S: AdjointStore + ?Sized>(
    tape: &Tape,
    region: &PreaccRegion,
    store: &mut S,
    mode: JacobianMode,
) -> Result<JacobianBlock> {
    let range = region.range()?;
    let (inputs, outputs) = region.sweep_ids();
    let (n, m) = (inputs.len(), outputs.len());
    let mut jacobian = JacobianBlock::zeros(region.inputs().to_vec(), region.outputs().to_vec());

    match mode.resolve(n, m) {
        JacobianMode::Forward => {
            for (col, &input) in inputs.iter().enumerate() {
                store.set(input, 1.0)?;
                evaluate_forward(tape, range.clone(), store)?;
                for (row, &output) in outputs.iter().enumerate() {
                    jacobian.set(row, col, store.get(output)?);
                }
                reset_range(tape, range.clone(), store)?;
                store.set(input, 0.0)?;
            }
        }
        _ => {
            for (row, &output) in outputs.iter().enumerate() {
                store.set(output, 1.0)?;
                evaluate_reverse(tape, range.clone(), store)?;
                for (col, &input) in inputs.iter().enumerate() {
                    jacobian.set(row, col, store.take(input)?);
                }
                reset_range(tape, range.clone(), store)?;
            }
        }
    }
    Ok(jacobian)
}
