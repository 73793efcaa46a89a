use super::gate::Gate;
use crate::error::{Error, Result};

/// Where a rotation angle of a gate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AngleSource {
    Fixed,
    /// Index into the trainable parameter vector.
    Param(usize),
    /// Index into the input feature vector.
    Feature(usize),
}

/// A gate plus the provenance of each of its rotation slots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Op {
    pub gate: Gate,
    pub sources: [AngleSource; 3],
}

impl Op {
    pub fn fixed(gate: Gate) -> Self {
        Self {
            gate,
            sources: [AngleSource::Fixed; 3],
        }
    }

    pub fn is_differentiable(&self) -> bool {
        self.sources[..self.gate.n_slots()]
            .iter()
            .any(|s| *s != AngleSource::Fixed)
    }
}

/// An ordered gate sequence on `n_qubits` wires, all starting in `|0>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.ops.iter().map(|op| &op.gate)
    }

    pub(crate) fn ops_mut(&mut self) -> &mut [Op] {
        &mut self.ops
    }

    pub fn push(&mut self, gate: Gate) {
        self.ops.push(Op::fixed(gate));
    }

    pub fn push_bound(&mut self, gate: Gate, sources: [AngleSource; 3]) {
        self.ops.push(Op { gate, sources });
    }

    pub fn push_op(&mut self, op: Op) {
        self.ops.push(op);
    }

    pub fn extend(&mut self, other: Circuit) {
        self.ops.extend(other.ops);
    }

    /// Checks every gate against the register width.
    pub fn validate(&self) -> Result<()> {
        self.ops
            .iter()
            .try_for_each(|op| check_targets(&op.gate, self.n_qubits))
    }
}

pub(crate) fn check_targets(gate: &Gate, n_qubits: usize) -> Result<()> {
    let (a, b) = gate.qubits();
    for q in std::iter::once(a).chain(b) {
        if q >= n_qubits {
            return Err(Error::QubitIndex { index: q, n_qubits });
        }
    }
    if Some(a) == b {
        return Err(Error::InvalidTargets(vec![a, a]));
    }
    Ok(())
}
