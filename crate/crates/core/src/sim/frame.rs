use super::{Fault, FaultKind, Pauli};
use crate::circuit::{Circuit, Instruction};
use crate::gf2::BitVec;

/// Per-qubit Pauli frame, propagated forward gate by gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliFrame {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
}

impl PauliFrame {
    pub fn new(n: usize) -> Self {
        Self {
            x: vec![false; n],
            z: vec![false; n],
        }
    }

    pub fn apply_pauli(&mut self, q: usize, p: Pauli) {
        self.x[q] ^= p.has_x();
        self.z[q] ^= p.has_z();
    }

    /// Pushes the frame through one instruction; returns the measurement flip, if any.
    pub fn step(&mut self, ins: &Instruction) -> Option<bool> {
        match *ins {
            Instruction::Idle(_) => None,
            Instruction::H(q) => {
                std::mem::swap(&mut self.x[q], &mut self.z[q]);
                None
            }
            Instruction::Cx { control, target } => {
                self.x[target] ^= self.x[control];
                self.z[control] ^= self.z[target];
                None
            }
            Instruction::PrepZ(q) | Instruction::PrepX(q) => {
                self.x[q] = false;
                self.z[q] = false;
                None
            }
            Instruction::MeasZ(q) => {
                self.z[q] = false;
                Some(self.x[q])
            }
            Instruction::MeasX(q) => {
                self.x[q] = false;
                Some(self.z[q])
            }
        }
    }
}

/// Measurement flips produced by `faults`, by direct forward propagation.
pub fn propagate_faults(circuit: &Circuit, faults: &[Fault]) -> BitVec {
    let mut frame = PauliFrame::new(circuit.num_qubits());
    let mut flips = BitVec::zeros(circuit.num_measurements());
    let mut m = 0;
    for (i, ins) in circuit.instructions().enumerate() {
        let flip = frame.step(ins);
        let mut meas_flip = false;
        for f in faults.iter().filter(|f| f.location == i) {
            let qs: Vec<usize> = ins.qubits().collect();
            match f.kind {
                FaultKind::Single(p) => frame.apply_pauli(qs[0], p),
                FaultKind::Pair(a, b) => {
                    frame.apply_pauli(qs[0], a);
                    frame.apply_pauli(qs[1], b);
                }
                FaultKind::MeasFlip => meas_flip ^= true,
            }
        }
        if let Some(v) = flip {
            flips.set(m, v ^ meas_flip);
            m += 1;
        }
    }
    flips
}
