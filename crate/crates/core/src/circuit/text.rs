//! Line-based circuit format.
//!
//! ```text
//! circuit v1
//! qubits 10 data 7
//! role 7 syndrome
//! layer
//! prep_x 7
//! cx 7 0
//! meas_x 7 syndrome 0 1 X
//! meas_z 8 flag 0 1 X 0
//! layer noiseless
//! meas_z 0 final 0
//! ```
//!
//! Data roles are implicit. Gadget metadata is not serialized.

use std::fmt::Write;

use super::{Circuit, Instruction, Layer, MeasKind, QubitRole};
use crate::error::{Error, Result};

pub(super) fn write(c: &Circuit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "circuit v1");
    let _ = writeln!(s, "qubits {} data {}", c.num_qubits(), c.num_data);
    for (q, r) in c.roles.iter().enumerate().skip(c.num_data) {
        let name = match r {
            QubitRole::Data => "data",
            QubitRole::Syndrome => "syndrome",
            QubitRole::Flag => "flag",
        };
        let _ = writeln!(s, "role {q} {name}");
    }
    let mut meas = c.measurements.iter();
    for layer in &c.layers {
        let _ = writeln!(s, "{}", if layer.noiseless { "layer noiseless" } else { "layer" });
        for ins in &layer.instructions {
            match *ins {
                Instruction::PrepZ(q) => writeln!(s, "prep_z {q}"),
                Instruction::PrepX(q) => writeln!(s, "prep_x {q}"),
                Instruction::H(q) => writeln!(s, "h {q}"),
                Instruction::Idle(q) => writeln!(s, "idle {q}"),
                Instruction::Cx { control, target } => writeln!(s, "cx {control} {target}"),
                Instruction::MeasZ(q) | Instruction::MeasX(q) => {
                    let op = if matches!(ins, Instruction::MeasZ(_)) { "meas_z" } else { "meas_x" };
                    let tag = match meas.next().expect("annotation per measurement") {
                        MeasKind::Syndrome { face, round, basis } => format!("syndrome {face} {round} {basis}"),
                        MeasKind::Flag { face, round, basis, position } => {
                            format!("flag {face} {round} {basis} {position}")
                        }
                        MeasKind::FinalData { qubit } => format!("final {qubit}"),
                    };
                    writeln!(s, "{op} {q} {tag}")
                }
            }
            .expect("write to string");
        }
    }
    s
}

pub(super) fn parse(text: &str) -> Result<Circuit> {
    let mut roles = Vec::new();
    let mut num_data = 0;
    let mut layers: Vec<Layer> = Vec::new();
    let mut measurements = Vec::new();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: &str| Error::Parse { line, msg: msg.to_string() };
        let tok: Vec<&str> = raw.split_whitespace().collect();
        if tok.is_empty() || tok[0].starts_with('#') {
            continue;
        }
        let num = |k: usize| -> Result<usize> {
            tok.get(k)
                .ok_or_else(|| err("missing field"))?
                .parse()
                .map_err(|_| err("expected integer"))
        };
        if !saw_header {
            if tok != ["circuit", "v1"] {
                return Err(err("expected `circuit v1` header"));
            }
            saw_header = true;
            continue;
        }
        let qubit = |k: usize| -> Result<usize> {
            let q = num(k)?;
            if q >= roles.len() {
                return Err(err("qubit out of range"));
            }
            Ok(q)
        };
        match tok[0] {
            "qubits" => {
                let n = num(1)?;
                num_data = num(3)?;
                roles = (0..n)
                    .map(|q| if q < num_data { QubitRole::Data } else { QubitRole::Syndrome })
                    .collect();
            }
            "role" => {
                let q = qubit(1)?;
                roles[q] = match tok.get(2) {
                    Some(&"syndrome") => QubitRole::Syndrome,
                    Some(&"flag") => QubitRole::Flag,
                    Some(&"data") => QubitRole::Data,
                    _ => return Err(err("unknown role")),
                };
            }
            "layer" => layers.push(Layer {
                instructions: Vec::new(),
                noiseless: match tok.get(1) {
                    None => false,
                    Some(&"noiseless") => true,
                    Some(_) => return Err(err("unknown layer attribute")),
                },
            }),
            op => {
                let layer = layers.last_mut().ok_or_else(|| err("instruction before first layer"))?;
                let ins = match op {
                    "prep_z" => Instruction::PrepZ(qubit(1)?),
                    "prep_x" => Instruction::PrepX(qubit(1)?),
                    "h" => Instruction::H(qubit(1)?),
                    "idle" => Instruction::Idle(qubit(1)?),
                    "cx" => Instruction::Cx { control: qubit(1)?, target: qubit(2)? },
                    "meas_z" => Instruction::MeasZ(qubit(1)?),
                    "meas_x" => Instruction::MeasX(qubit(1)?),
                    _ => return Err(err("unknown instruction")),
                };
                if ins.is_measurement() {
                    let basis = |k: usize| -> Result<crate::code::Basis> {
                        tok.get(k).ok_or_else(|| err("missing basis"))?.parse().map_err(|_| err("bad basis"))
                    };
                    measurements.push(match tok.get(2) {
                        Some(&"syndrome") => MeasKind::Syndrome { face: num(3)?, round: num(4)?, basis: basis(5)? },
                        Some(&"flag") => MeasKind::Flag {
                            face: num(3)?,
                            round: num(4)?,
                            basis: basis(5)?,
                            position: num(6)?,
                        },
                        Some(&"final") => MeasKind::FinalData { qubit: num(3)? },
                        _ => return Err(err("measurement needs an annotation")),
                    });
                }
                layer.instructions.push(ins);
            }
        }
    }
    if !saw_header {
        return Err(Error::Parse { line: 0, msg: "empty input".into() });
    }
    Ok(Circuit {
        roles,
        layers,
        measurements,
        gadgets: Vec::new(),
        num_data,
    })
}
