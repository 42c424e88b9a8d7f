//! Layered Clifford circuits for stabilizer measurement.

mod build;
mod schedule;
mod text;

pub use build::{
    build_estimation_circuit, build_flagged_cycle, build_memory_experiment,
    build_single_ancilla_cycle, gadget_specs, EstimationSide, Method,
};
pub use schedule::{single_ancilla_slots, SCHEDULE_VERSION};

use serde::{Deserialize, Serialize};

use crate::code::Basis;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitRole {
    Data,
    Syndrome,
    Flag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    PrepZ(usize),
    PrepX(usize),
    H(usize),
    Cx { control: usize, target: usize },
    Idle(usize),
    MeasZ(usize),
    MeasX(usize),
}

impl Instruction {
    pub fn qubits(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Instruction::Cx { control, target } => (control, Some(target)),
            Instruction::PrepZ(q)
            | Instruction::PrepX(q)
            | Instruction::H(q)
            | Instruction::Idle(q)
            | Instruction::MeasZ(q)
            | Instruction::MeasX(q) => (q, None),
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self, Instruction::MeasZ(_) | Instruction::MeasX(_))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Layer {
    pub instructions: Vec<Instruction>,
    /// Ideal layer: no fault locations (the final readout of a memory experiment).
    pub noiseless: bool,
}

/// What a measurement outcome means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasKind {
    /// Syndrome bit of `face` for stabilizer type `basis` in 1-based `round`.
    Syndrome { face: usize, round: usize, basis: Basis },
    /// Flag bit `position` of the gadget measuring `basis` on `face`.
    Flag {
        face: usize,
        round: usize,
        basis: Basis,
        position: usize,
    },
    /// Transversal readout of a data qubit.
    FinalData { qubit: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetKind {
    SingleAncilla,
    TwoQubitFlag,
    FourQubitFlag,
}

/// Static description of how one face is measured in one basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetSpec {
    pub kind: GadgetKind,
    pub face: usize,
    pub basis: Basis,
    /// Gadget qubits: syndrome qubit first, then flags in flag-bit order.
    pub qubits: Vec<usize>,
    /// Data qubits touched by each gadget qubit, in CNOT order.
    pub data: Vec<Vec<usize>>,
    /// Layer offset (within the data-interaction block) of each data CNOT.
    pub slots: Vec<Vec<usize>>,
}

impl GadgetSpec {
    pub fn syndrome_qubit(&self) -> usize {
        self.qubits[0]
    }

    pub fn flag_qubits(&self) -> &[usize] {
        &self.qubits[1..]
    }

    pub fn num_flags(&self) -> usize {
        self.qubits.len() - 1
    }
}

/// A gadget placed in a circuit at a particular round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetInstance {
    pub spec: GadgetSpec,
    pub round: usize,
    pub syndrome_meas: usize,
    pub flag_meas: Vec<usize>,
    /// Index of the last layer of the half-cycle containing this gadget.
    pub end_layer: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub roles: Vec<QubitRole>,
    pub layers: Vec<Layer>,
    /// Meaning of each measurement, in the order measurements occur.
    pub measurements: Vec<MeasKind>,
    pub gadgets: Vec<GadgetInstance>,
    pub num_data: usize,
}

impl Circuit {
    pub fn num_qubits(&self) -> usize {
        self.roles.len()
    }

    pub fn num_measurements(&self) -> usize {
        self.measurements.len()
    }

    pub fn num_ancillas(&self) -> usize {
        self.num_qubits() - self.num_data
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.layers.iter().flat_map(|l| l.instructions.iter())
    }

    /// Number of layers containing at least one CNOT between an ancilla and a data qubit.
    pub fn data_cnot_depth(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| {
                l.instructions.iter().any(|i| match *i {
                    Instruction::Cx { control, target } => {
                        (control < self.num_data) != (target < self.num_data)
                    }
                    _ => false,
                })
            })
            .count()
    }

    /// Checks layer disjointness and that every ancilla is prepared before
    /// each measurement and measured before it is prepared again.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_qubits();
        // Data qubits are live from the start so that bare fragments validate.
        let mut live: Vec<bool> = (0..n).map(|q| q < self.num_data).collect();
        let mut measured = 0;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; n];
            for ins in &layer.instructions {
                for q in ins.qubits() {
                    if q >= n {
                        return Err(Error::ScheduleConflict(format!(
                            "layer {li}: qubit {q} out of range"
                        )));
                    }
                    if used[q] {
                        return Err(Error::ScheduleConflict(format!(
                            "layer {li}: qubit {q} used twice"
                        )));
                    }
                    used[q] = true;
                }
                match *ins {
                    Instruction::PrepX(q) | Instruction::PrepZ(q) => {
                        if live[q] && self.roles[q] != QubitRole::Data {
                            return Err(Error::ScheduleConflict(format!(
                                "layer {li}: ancilla {q} re-prepared without measurement"
                            )));
                        }
                        live[q] = true;
                    }
                    Instruction::MeasX(q) | Instruction::MeasZ(q) => {
                        if !live[q] {
                            return Err(Error::ScheduleConflict(format!(
                                "layer {li}: qubit {q} measured without preparation"
                            )));
                        }
                        live[q] = false;
                        measured += 1;
                    }
                    Instruction::Cx { control, target } => {
                        if !live[control] || !live[target] {
                            return Err(Error::ScheduleConflict(format!(
                                "layer {li}: CNOT on unprepared qubit"
                            )));
                        }
                    }
                    Instruction::H(q) => {
                        if !live[q] {
                            return Err(Error::ScheduleConflict(format!(
                                "layer {li}: gate on unprepared qubit {q}"
                            )));
                        }
                    }
                    Instruction::Idle(_) => {}
                }
            }
        }
        if measured != self.measurements.len() {
            return Err(Error::ShapeMismatch(format!(
                "{measured} measurements but {} annotations",
                self.measurements.len()
            )));
        }
        Ok(())
    }

    /// Measurement index lookup for syndrome bits: `[round-1][face]`.
    pub fn syndrome_index(&self, basis: Basis) -> Vec<Vec<usize>> {
        let mut rounds: Vec<Vec<Option<usize>>> = Vec::new();
        for (m, kind) in self.measurements.iter().enumerate() {
            if let MeasKind::Syndrome {
                face,
                round,
                basis: b,
            } = *kind
            {
                if b != basis {
                    continue;
                }
                if rounds.len() < round {
                    rounds.resize(round, Vec::new());
                }
                let r = &mut rounds[round - 1];
                if r.len() <= face {
                    r.resize(face + 1, None);
                }
                r[face] = Some(m);
            }
        }
        rounds
            .into_iter()
            .map(|r| r.into_iter().map(|m| m.expect("dense syndrome map")).collect())
            .collect()
    }

    /// Measurement index of each data qubit's final readout, if present.
    pub fn final_data_index(&self) -> Option<Vec<usize>> {
        let mut out = vec![None; self.num_data];
        for (m, kind) in self.measurements.iter().enumerate() {
            if let MeasKind::FinalData { qubit } = *kind {
                out[qubit] = Some(m);
            }
        }
        out.into_iter().collect()
    }

    /// Gadget instances indexed `[round-1][face]` for one basis.
    pub fn gadget_index(&self, basis: Basis) -> Vec<Vec<usize>> {
        let mut rounds: Vec<Vec<usize>> = Vec::new();
        for (g, inst) in self.gadgets.iter().enumerate() {
            if inst.spec.basis != basis {
                continue;
            }
            if rounds.len() < inst.round {
                rounds.resize(inst.round, Vec::new());
            }
            let r = &mut rounds[inst.round - 1];
            if r.len() <= inst.spec.face {
                r.resize(inst.spec.face + 1, usize::MAX);
            }
            r[inst.spec.face] = g;
        }
        rounds
    }

    pub fn to_text(&self) -> String {
        text::write(self)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        text::parse(s)
    }
}
