use serde::{Deserialize, Serialize};

use super::schedule::{edge_color_bipartite, single_ancilla_depth, single_ancilla_slots};
use super::{Circuit, GadgetInstance, GadgetKind, GadgetSpec, Instruction, Layer, MeasKind, QubitRole};
use crate::code::{Basis, ColorCode, Face, FaceKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SingleAncilla,
    Flagged,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::SingleAncilla => "single_ancilla",
            Method::Flagged => "flagged",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_ancilla" | "single-ancilla" => Ok(Method::SingleAncilla),
            "flagged" => Ok(Method::Flagged),
            _ => Err(Error::Invalid(format!("unknown method {s:?}"))),
        }
    }
}

/// Which estimation circuit: `CX` informs X-error decoding, `CZ` Z-error decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimationSide {
    CX,
    CZ,
}

impl EstimationSide {
    /// Basis of the errors this side estimates.
    pub fn error_basis(self) -> Basis {
        match self {
            EstimationSide::CX => Basis::X,
            EstimationSide::CZ => Basis::Z,
        }
    }

    pub fn for_errors(basis: Basis) -> Self {
        match basis {
            Basis::X => EstimationSide::CX,
            Basis::Z => EstimationSide::CZ,
        }
    }
}

/// Support of `face` rotated to start just after its widest angular gap, so
/// that contiguous chunks are contiguous on the face boundary even when the
/// face is truncated.
fn cyclic_support(code: &ColorCode, face: &Face) -> Vec<usize> {
    let (cx, cy) = face.center;
    let ang: Vec<f64> = face
        .support
        .iter()
        .map(|&q| (code.positions[q].1 - cy).atan2(code.positions[q].0 - cx))
        .collect();
    let n = ang.len();
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..n {
        let next = (i + 1) % n;
        let mut gap = ang[next] - ang[i];
        if gap <= 0.0 {
            gap += std::f64::consts::TAU;
        }
        // Strictly greater keeps the first widest gap, so full faces stay unrotated
        // up to floating-point noise in equal gaps.
        if gap > best.0 + 1e-9 {
            best = (gap, next);
        }
    }
    let start = if n > 0 && best.0 > std::f64::consts::TAU / n as f64 + 1e-9 {
        best.1
    } else {
        0
    };
    (0..n).map(|i| face.support[(start + i) % n]).collect()
}

/// First ancilla index of each face and the total qubit count.
fn ancilla_layout(code: &ColorCode, method: Method) -> Result<(Vec<usize>, Vec<QubitRole>)> {
    let n = code.num_qubits();
    let mut roles = vec![QubitRole::Data; n];
    let mut base = Vec::with_capacity(code.num_faces());
    for face in &code.faces {
        base.push(roles.len());
        roles.push(QubitRole::Syndrome);
        if method == Method::Flagged {
            let flags = match face.weight() {
                4 | 6 => 1,
                8 => 3,
                w => return Err(Error::UnsupportedFace { face: face.id, weight: w }),
            };
            roles.extend(std::iter::repeat(QubitRole::Flag).take(flags));
        }
    }
    Ok((base, roles))
}

/// Gadget descriptions for every face in one basis.
pub fn gadget_specs(code: &ColorCode, method: Method, basis: Basis) -> Result<Vec<GadgetSpec>> {
    let (base, _) = ancilla_layout(code, method)?;
    match method {
        Method::SingleAncilla => {
            let slots = single_ancilla_slots(code)?;
            Ok(code
                .faces
                .iter()
                .map(|f| GadgetSpec {
                    kind: GadgetKind::SingleAncilla,
                    face: f.id,
                    basis,
                    qubits: vec![base[f.id]],
                    data: vec![f.support.clone()],
                    slots: vec![slots[f.id].clone()],
                })
                .collect())
        }
        Method::Flagged => {
            let mut specs = Vec::with_capacity(code.num_faces());
            for f in &code.faces {
                let cyc = cyclic_support(code, f);
                let w = cyc.len();
                let (kind, qubits, data) = match (f.kind, w) {
                    (FaceKind::Octagon, 8) => {
                        // Gadget qubits [s, x, y, top]; s and top own adjacent pairs.
                        let b = base[f.id];
                        let pair = |i: usize| cyc[2 * i..2 * i + 2].to_vec();
                        (
                            GadgetKind::FourQubitFlag,
                            vec![b, b + 1, b + 2, b + 3],
                            vec![pair(0), pair(3), pair(2), pair(1)],
                        )
                    }
                    (_, 4) | (_, 6) => {
                        let b = base[f.id];
                        (
                            GadgetKind::TwoQubitFlag,
                            vec![b, b + 1],
                            vec![cyc[..w / 2].to_vec(), cyc[w / 2..].to_vec()],
                        )
                    }
                    _ => return Err(Error::UnsupportedFace { face: f.id, weight: w }),
                };
                specs.push(GadgetSpec {
                    kind,
                    face: f.id,
                    basis,
                    slots: data.iter().map(|d| vec![0; d.len()]).collect(),
                    qubits,
                    data,
                });
            }
            let mut edges = Vec::new();
            for s in &specs {
                for (g, ds) in s.data.iter().enumerate() {
                    for &d in ds {
                        edges.push((s.qubits[g] - code.num_qubits(), d));
                    }
                }
            }
            let num_anc = specs
                .iter()
                .flat_map(|s| s.qubits.iter())
                .max()
                .map_or(0, |&m| m + 1 - code.num_qubits());
            let colors = edge_color_bipartite(&edges, num_anc, code.num_qubits(), 3)?;
            let mut it = colors.into_iter();
            for s in &mut specs {
                for slots in &mut s.slots {
                    for slot in slots.iter_mut() {
                        *slot = it.next().expect("one color per edge");
                    }
                }
            }
            Ok(specs)
        }
    }
}

struct Builder {
    roles: Vec<QubitRole>,
    num_data: usize,
    layers: Vec<Layer>,
    measurements: Vec<MeasKind>,
    gadgets: Vec<GadgetInstance>,
}

impl Builder {
    fn new(roles: Vec<QubitRole>, num_data: usize) -> Self {
        Self {
            roles,
            num_data,
            layers: Vec::new(),
            measurements: Vec::new(),
            gadgets: Vec::new(),
        }
    }

    fn push_layer(&mut self, ops: Vec<(Instruction, Option<MeasKind>)>) -> Result<()> {
        let mut used = vec![false; self.roles.len()];
        let mut instructions = Vec::with_capacity(self.roles.len());
        for (ins, meas) in ops {
            for q in ins.qubits() {
                if std::mem::replace(&mut used[q], true) {
                    return Err(Error::ScheduleConflict(format!(
                        "layer {}: qubit {q} used twice",
                        self.layers.len()
                    )));
                }
            }
            if ins.is_measurement() {
                self.measurements.push(meas.expect("measurement annotated"));
            }
            instructions.push(ins);
        }
        instructions.extend((0..self.roles.len()).filter(|&q| !used[q]).map(Instruction::Idle));
        self.layers.push(Layer { instructions, noiseless: false });
        Ok(())
    }

    /// Appends one stabilizer half-cycle. `prep_override` replaces the
    /// preparation basis of every gadget qubit (estimation circuits).
    fn half_cycle(
        &mut self,
        specs: &[GadgetSpec],
        round: usize,
        prep_override: Option<Basis>,
        single_depth: usize,
    ) -> Result<()> {
        let Some(first) = specs.first() else {
            return Ok(());
        };
        let has_four = specs.iter().any(|s| s.kind == GadgetKind::FourQubitFlag);
        let num_layers = match first.kind {
            GadgetKind::SingleAncilla => single_depth + 2,
            _ if has_four => 9,
            _ => 7,
        };
        let mut plan: Vec<Vec<(Instruction, Option<MeasKind>)>> = vec![Vec::new(); num_layers];
        let meas_start = self.measurements.len();
        for spec in specs {
            let basis = spec.basis;
            let cx = |a: usize, b: usize| match basis {
                Basis::X => Instruction::Cx { control: a, target: b },
                Basis::Z => Instruction::Cx { control: b, target: a },
            };
            let prep = |is_syndrome: bool| {
                let b = prep_override.unwrap_or(if is_syndrome { basis } else { basis.dual() });
                move |q| match b {
                    Basis::X => Instruction::PrepX(q),
                    Basis::Z => Instruction::PrepZ(q),
                }
            };
            let meas = |is_syndrome: bool, q: usize| match (is_syndrome, basis) {
                (true, Basis::X) | (false, Basis::Z) => Instruction::MeasX(q),
                _ => Instruction::MeasZ(q),
            };
            let q = &spec.qubits;
            let (t_prep, t_data, cat, uncat, t_meas): (usize, usize, Vec<(usize, usize, usize)>, Vec<(usize, usize, usize)>, usize) =
                match spec.kind {
                    GadgetKind::SingleAncilla => (0, 1, vec![], vec![], num_layers - 1),
                    GadgetKind::TwoQubitFlag => {
                        let o = if has_four { 1 } else { 0 };
                        (o, o + 2, vec![(o + 1, q[0], q[1])], vec![(o + 5, q[0], q[1])], o + 6)
                    }
                    // The cat is grown along s-x, s-top, x-y but uncomputed along
                    // s-y, x-top, s-x, so a fault on s or x between the first two
                    // layers crosses all three flag parities.
                    GadgetKind::FourQubitFlag => (
                        0,
                        3,
                        vec![(1, q[0], q[1]), (2, q[0], q[3]), (2, q[1], q[2])],
                        vec![(6, q[0], q[2]), (6, q[1], q[3]), (7, q[0], q[1])],
                        8,
                    ),
                };
            for (i, &g) in q.iter().enumerate() {
                plan[t_prep].push((prep(i == 0)(g), None));
            }
            for &(t, a, b) in cat.iter().chain(&uncat) {
                plan[t].push((cx(a, b), None));
            }
            for (g, ds) in spec.data.iter().enumerate() {
                for (k, &d) in ds.iter().enumerate() {
                    plan[t_data + spec.slots[g][k]].push((cx(q[g], d), None));
                }
            }
            plan[t_meas].push((
                meas(true, q[0]),
                Some(MeasKind::Syndrome { face: spec.face, round, basis }),
            ));
            for (pos, &f) in q[1..].iter().enumerate() {
                plan[t_meas].push((
                    meas(false, f),
                    Some(MeasKind::Flag { face: spec.face, round, basis, position: pos }),
                ));
            }
        }
        for ops in plan {
            self.push_layer(ops)?;
        }
        let end_layer = self.layers.len() - 1;
        for spec in specs {
            let mut syndrome_meas = usize::MAX;
            let mut flag_meas = vec![usize::MAX; spec.num_flags()];
            for (m, kind) in self.measurements.iter().enumerate().skip(meas_start) {
                match *kind {
                    MeasKind::Syndrome { face, .. } if face == spec.face => syndrome_meas = m,
                    MeasKind::Flag { face, position, .. } if face == spec.face => flag_meas[position] = m,
                    _ => {}
                }
            }
            self.gadgets.push(GadgetInstance {
                spec: spec.clone(),
                round,
                syndrome_meas,
                flag_meas,
                end_layer,
            });
        }
        Ok(())
    }

    fn data_layer(&mut self, basis: Basis, measure: bool) -> Result<()> {
        let ops = (0..self.num_data)
            .map(|q| match (measure, basis) {
                (false, Basis::Z) => (Instruction::PrepZ(q), None),
                (false, Basis::X) => (Instruction::PrepX(q), None),
                (true, Basis::Z) => (Instruction::MeasZ(q), Some(MeasKind::FinalData { qubit: q })),
                (true, Basis::X) => (Instruction::MeasX(q), Some(MeasKind::FinalData { qubit: q })),
            })
            .collect();
        self.push_layer(ops)
    }

    fn finish(self) -> Circuit {
        Circuit {
            roles: self.roles,
            layers: self.layers,
            measurements: self.measurements,
            gadgets: self.gadgets,
            num_data: self.num_data,
        }
    }
}

fn fragment(code: &ColorCode, method: Method, basis: Basis) -> Result<Circuit> {
    let (_, roles) = ancilla_layout(code, method)?;
    let specs = gadget_specs(code, method, basis)?;
    let sd = single_ancilla_depth(code.family);
    let mut b = Builder::new(roles, code.num_qubits());
    b.half_cycle(&specs, 1, None, sd)?;
    Ok(b.finish())
}

/// One half-cycle measuring every `basis` stabilizer with a single ancilla per face.
pub fn build_single_ancilla_cycle(code: &ColorCode, basis: Basis) -> Result<Circuit> {
    fragment(code, Method::SingleAncilla, basis)
}

/// One half-cycle measuring every `basis` stabilizer with flag gadgets.
pub fn build_flagged_cycle(code: &ColorCode, basis: Basis) -> Result<Circuit> {
    fragment(code, Method::Flagged, basis)
}

/// `d` rounds of (X half-cycle, Z half-cycle) followed by an ideal transversal
/// data readout, which plays the role of a final perfect round of error
/// correction. Decoding X errors prepares and reads out in the Z basis, and
/// vice versa.
pub fn build_memory_experiment(code: &ColorCode, method: Method, decode_basis: Basis) -> Result<Circuit> {
    let (_, roles) = ancilla_layout(code, method)?;
    let x_specs = gadget_specs(code, method, Basis::X)?;
    let z_specs = gadget_specs(code, method, Basis::Z)?;
    let data_basis = decode_basis.dual();
    let sd = single_ancilla_depth(code.family);
    let mut b = Builder::new(roles, code.num_qubits());
    b.data_layer(data_basis, false)?;
    for round in 1..=code.distance {
        b.half_cycle(&x_specs, round, None, sd)?;
        b.half_cycle(&z_specs, round, None, sd)?;
    }
    b.data_layer(data_basis, true)?;
    b.layers.last_mut().expect("readout layer").noiseless = true;
    Ok(b.finish())
}

/// One cycle whose first half has every qubit prepared in the readout basis,
/// so that data errors, flags and measurement errors are all observable.
pub fn build_estimation_circuit(code: &ColorCode, method: Method, side: EstimationSide) -> Result<Circuit> {
    let (_, roles) = ancilla_layout(code, method)?;
    let x_specs = gadget_specs(code, method, Basis::X)?;
    let z_specs = gadget_specs(code, method, Basis::Z)?;
    let sd = single_ancilla_depth(code.family);
    let mut b = Builder::new(roles, code.num_qubits());
    match side {
        EstimationSide::CX => {
            b.data_layer(Basis::Z, false)?;
            b.half_cycle(&x_specs, 1, Some(Basis::Z), sd)?;
            b.half_cycle(&z_specs, 1, None, sd)?;
            b.data_layer(Basis::Z, true)?;
        }
        EstimationSide::CZ => {
            b.data_layer(Basis::X, false)?;
            b.half_cycle(&z_specs, 1, Some(Basis::X), sd)?;
            b.half_cycle(&x_specs, 1, None, sd)?;
            b.data_layer(Basis::X, true)?;
        }
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Family;

    fn code(f: Family, d: usize) -> ColorCode {
        ColorCode::build(f, d).unwrap()
    }

    #[test]
    fn single_ancilla_depths() {
        let c = build_single_ancilla_cycle(&code(Family::C488, 3), Basis::X).unwrap();
        assert_eq!(c.num_ancillas(), 3);
        assert_eq!(c.data_cnot_depth(), 8);
        let c = build_single_ancilla_cycle(&code(Family::C666, 3), Basis::Z).unwrap();
        assert_eq!(c.num_ancillas(), 3);
        assert_eq!(c.data_cnot_depth(), 6);
    }

    #[test]
    fn flagged_depth_is_three_and_gadgets_match_faces() {
        for f in [Family::C488, Family::C666] {
            for d in [3, 5, 7] {
                let k = code(f, d);
                let c = build_flagged_cycle(&k, Basis::X).unwrap();
                c.validate().unwrap();
                assert_eq!(c.data_cnot_depth(), 3, "{f} d={d}");
                for g in &c.gadgets {
                    let face = &k.faces[g.spec.face];
                    let total: usize = g.spec.data.iter().map(Vec::len).sum();
                    assert_eq!(total, face.weight());
                    match g.spec.kind {
                        GadgetKind::FourQubitFlag => {
                            assert_eq!(face.weight(), 8);
                            assert!(g.spec.data.iter().all(|d| d.len() == 2));
                        }
                        GadgetKind::TwoQubitFlag => {
                            assert!(g.spec.data.iter().all(|d| (2..=3).contains(&d.len())));
                        }
                        GadgetKind::SingleAncilla => unreachable!(),
                    }
                }
            }
        }
    }

    #[test]
    fn qubit_totals_match_closed_forms() {
        for d in [3usize, 5, 7] {
            let n488 = (3 * d * d + 6 * d - 5) / 4;
            let n666 = (9 * d * d - 1) / 8;
            let f488 = (5 * d * d + 4 * d - 5) / 4;
            let f666 = (3 * d * d - 1) / 2;
            let m = |f, m| build_memory_experiment(&code(f, d), m, Basis::X).unwrap().num_qubits();
            assert_eq!(m(Family::C488, Method::SingleAncilla), n488);
            assert_eq!(m(Family::C666, Method::SingleAncilla), n666);
            assert_eq!(m(Family::C488, Method::Flagged), f488);
            assert_eq!(m(Family::C666, Method::Flagged), f666);
        }
    }

    #[test]
    fn memory_measurement_map_counts() {
        let k = code(Family::C488, 3);
        let c = build_memory_experiment(&k, Method::Flagged, Basis::X).unwrap();
        c.validate().unwrap();
        let count = |pred: fn(&MeasKind) -> bool| c.measurements.iter().filter(|m| pred(m)).count();
        assert_eq!(count(|m| matches!(m, MeasKind::Syndrome { basis: Basis::X, .. })), 9);
        assert_eq!(count(|m| matches!(m, MeasKind::Syndrome { basis: Basis::Z, .. })), 9);
        assert_eq!(count(|m| matches!(m, MeasKind::Flag { .. })), 18);
        assert_eq!(count(|m| matches!(m, MeasKind::FinalData { .. })), 7);
        assert_eq!(c.syndrome_index(Basis::Z).len(), 3);
        assert_eq!(c.final_data_index().unwrap().len(), 7);
    }

    #[test]
    fn estimation_circuit_shape() {
        let k = code(Family::C488, 3);
        let c = build_estimation_circuit(&k, Method::Flagged, EstimationSide::CX).unwrap();
        c.validate().unwrap();
        assert_eq!(c.gadgets.iter().filter(|g| g.spec.basis == Basis::X).count(), 3);
        assert_eq!(c.final_data_index().unwrap().len(), 7);
        // Every ancilla of the X half starts in |0>.
        let first_half = &c.layers[1];
        assert!(first_half
            .instructions
            .iter()
            .all(|i| !matches!(i, Instruction::PrepX(_))));
    }

    #[test]
    fn octagon_support_pairs_are_adjacent() {
        let k = code(Family::C488, 5);
        let specs = gadget_specs(&k, Method::Flagged, Basis::X).unwrap();
        let oct = specs.iter().find(|s| s.kind == GadgetKind::FourQubitFlag).unwrap();
        for pair in &oct.data {
            let (a, b) = (k.positions[pair[0]], k.positions[pair[1]]);
            let dist = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            assert!(dist < 3.0, "pair {pair:?} not adjacent");
        }
    }
}
