use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ActiveValue, Tape};
use crate::error::Result;

/// Elementary operations with closed-form partials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Log,
    Copy,
}

impl ElementaryOp {
    pub const ALL: [ElementaryOp; 9] = [
        ElementaryOp::Add,
        ElementaryOp::Sub,
        ElementaryOp::Mul,
        ElementaryOp::Div,
        ElementaryOp::Sin,
        ElementaryOp::Cos,
        ElementaryOp::Exp,
        ElementaryOp::Log,
        ElementaryOp::Copy,
    ];

    pub fn arity(self) -> usize {
        match self {
            ElementaryOp::Add | ElementaryOp::Sub | ElementaryOp::Mul | ElementaryOp::Div => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementaryOp::Add => "add",
            ElementaryOp::Sub => "sub",
            ElementaryOp::Mul => "mul",
            ElementaryOp::Div => "div",
            ElementaryOp::Sin => "sin",
            ElementaryOp::Cos => "cos",
            ElementaryOp::Exp => "exp",
            ElementaryOp::Log => "log",
            ElementaryOp::Copy => "copy",
        }
    }

    /// Primal value. `b` is ignored for unary operations.
    #[inline]
    pub fn primal(self, a: f64, b: f64) -> f64 {
        match self {
            ElementaryOp::Add => a + b,
            ElementaryOp::Sub => a - b,
            ElementaryOp::Mul => a * b,
            ElementaryOp::Div => a / b,
            ElementaryOp::Sin => a.sin(),
            ElementaryOp::Cos => a.cos(),
            ElementaryOp::Exp => a.exp(),
            ElementaryOp::Log => a.ln(),
            ElementaryOp::Copy => a,
        }
    }

    /// Partials with respect to `a` and `b`; the second entry is 0 for unary operations.
    #[inline]
    pub fn partials(self, a: f64, b: f64) -> [f64; 2] {
        match self {
            ElementaryOp::Add => [1.0, 1.0],
            ElementaryOp::Sub => [1.0, -1.0],
            ElementaryOp::Mul => [b, a],
            ElementaryOp::Div => [1.0 / b, -a / (b * b)],
            ElementaryOp::Sin => [a.cos(), 0.0],
            ElementaryOp::Cos => [-a.sin(), 0.0],
            ElementaryOp::Exp => [a.exp(), 0.0],
            ElementaryOp::Log => [1.0 / a, 0.0],
            ElementaryOp::Copy => [1.0, 0.0],
        }
    }
}

impl fmt::Display for ElementaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementaryOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ElementaryOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| format!("unknown elementary operation `{s}`"))
    }
}

impl Tape {
    /// Records a unary elementary operation.
    pub fn unary(&mut self, op: ElementaryOp, a: ActiveValue) -> Result<ActiveValue> {
        debug_assert_eq!(op.arity(), 1);
        let [da, _] = op.partials(a.primal, 0.0);
        self.record(&[a], op.primal(a.primal, 0.0), &[da])
    }

    /// Records a binary elementary operation.
    pub fn binary(
        &mut self,
        op: ElementaryOp,
        a: ActiveValue,
        b: ActiveValue,
    ) -> Result<ActiveValue> {
        debug_assert_eq!(op.arity(), 2);
        let partials = op.partials(a.primal, b.primal);
        self.record(&[a, b], op.primal(a.primal, b.primal), &partials)
    }

    pub fn add(&mut self, a: ActiveValue, b: ActiveValue) -> Result<ActiveValue> {
        self.binary(ElementaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: ActiveValue, b: ActiveValue) -> Result<ActiveValue> {
        self.binary(ElementaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: ActiveValue, b: ActiveValue) -> Result<ActiveValue> {
        self.binary(ElementaryOp::Mul, a, b)
    }

    pub fn div(&mut self, a: ActiveValue, b: ActiveValue) -> Result<ActiveValue> {
        self.binary(ElementaryOp::Div, a, b)
    }

    pub fn sin(&mut self, a: ActiveValue) -> Result<ActiveValue> {
        self.unary(ElementaryOp::Sin, a)
    }

    pub fn cos(&mut self, a: ActiveValue) -> Result<ActiveValue> {
        self.unary(ElementaryOp::Cos, a)
    }

    pub fn exp(&mut self, a: ActiveValue) -> Result<ActiveValue> {
        self.unary(ElementaryOp::Exp, a)
    }

    pub fn log(&mut self, a: ActiveValue) -> Result<ActiveValue> {
        self.unary(ElementaryOp::Log, a)
    }

    /// Copy assignment: a new statement with partial 1 and a fresh identifier.
    pub fn copy(&mut self, a: ActiveValue) -> Result<ActiveValue> {
        self.unary(ElementaryOp::Copy, a)
    }
}
