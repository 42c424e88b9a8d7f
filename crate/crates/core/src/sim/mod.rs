//! Circuit-level depolarizing noise, sampled with a Pauli frame.
//!
//! A backward sweep over the circuit records, for every fault location, the
//! set of measurements flipped by an X or Z error on each qubit right after
//! that location. A shot is then the reference outcomes XOR the signatures of
//! the sampled faults, so sampling cost scales with the number of faults
//! rather than the circuit size.

mod frame;
mod tableau;

pub use frame::{propagate_faults, PauliFrame};
pub use tableau::{reference_run, Reference, Tableau};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Instruction};
use crate::code::Basis;
use crate::error::{Error, Result};
use crate::gf2::BitVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    /// Pauli of the given type, as used for frame updates.
    pub fn of_basis(b: Basis) -> Self {
        match b {
            Basis::X => Pauli::X,
            Basis::Z => Pauli::Z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
}

impl NoiseModel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::Invalid(format!("physical error rate {p} outside [0, 1]")));
        }
        Ok(Self { p })
    }

    /// Draws from the single-qubit depolarizing channel.
    pub fn sample_single(&self, rng: &mut impl Rng) -> Pauli {
        if rng.gen::<f64>() >= self.p {
            return Pauli::I;
        }
        [Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)]
    }

    /// Draws from the two-qubit depolarizing channel.
    pub fn sample_two(&self, rng: &mut impl Rng) -> (Pauli, Pauli) {
        if rng.gen::<f64>() >= self.p {
            return (Pauli::I, Pauli::I);
        }
        nonidentity_pair(rng.gen_range(0..15))
    }
}

fn nonidentity_pair(k: usize) -> (Pauli, Pauli) {
    const P: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let k = k + 1;
    (P[k / 4], P[k % 4])
}

/// One fault: a Pauli after a gate, idle or preparation, or an inverted readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    Single(Pauli),
    Pair(Pauli, Pauli),
    MeasFlip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fault {
    /// Index into the circuit's flattened instruction list.
    pub location: usize,
    pub kind: FaultKind,
}

/// Measurement outcomes of one shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    pub bits: BitVec,
    /// Faults injected in this shot; populated only when requested.
    pub faults: Vec<Fault>,
}

impl ShotRecord {
    pub fn get(&self, m: usize) -> bool {
        self.bits.get(m)
    }
}

#[derive(Clone, Debug)]
struct Location {
    ins: Instruction,
    /// Measurement index for measurements.
    meas: u32,
    /// `sig[k][0]`: flips from X on the k-th qubit after the instruction; `[1]` from Z.
    sig: [[Vec<u32>; 2]; 2],
}

/// Per-circuit sampler with precomputed fault signatures.
#[derive(Clone, Debug)]
pub struct FrameSampler {
    reference: Reference,
    locations: Vec<Location>,
    /// Indices of locations that can fault (outside noiseless layers), ascending.
    noisy: Vec<u32>,
    num_meas: usize,
    /// Sensitivities at each layer boundary for data-qubit frame updates:
    /// `boundary[layer][q] = (flips from X, flips from Z)` after `layer`.
    boundary: Vec<Vec<(Vec<u32>, Vec<u32>)>>,
}

fn sparse(v: &BitVec) -> Vec<u32> {
    v.ones().map(|i| i as u32).collect()
}

impl FrameSampler {
    pub fn new(circuit: &Circuit) -> Result<Self> {
        let reference = reference_run(circuit)?;
        let m = circuit.num_measurements();
        let n = circuit.num_qubits();
        let mut meas_of = Vec::new();
        let mut k = 0u32;
        for ins in circuit.instructions() {
            meas_of.push(if ins.is_measurement() {
                k += 1;
                k - 1
            } else {
                u32::MAX
            });
        }
        let mut sx = vec![BitVec::zeros(m); n];
        let mut sz = vec![BitVec::zeros(m); n];
        let total: usize = circuit.layers.iter().map(|l| l.instructions.len()).sum();
        let mut locations: Vec<Option<Location>> = vec![None; total];
        let mut boundary = vec![Vec::new(); circuit.layers.len()];
        let mut idx = total;
        for (li, layer) in circuit.layers.iter().enumerate().rev() {
            boundary[li] = (0..circuit.num_data)
                .map(|q| (sparse(&sx[q]), sparse(&sz[q])))
                .collect();
            for ins in layer.instructions.iter().rev() {
                idx -= 1;
                let qs: Vec<usize> = ins.qubits().collect();
                let sig_of = |q: Option<&usize>, sx: &[BitVec], sz: &[BitVec]| match q {
                    Some(&q) => [sparse(&sx[q]), sparse(&sz[q])],
                    None => [Vec::new(), Vec::new()],
                };
                let sig = if ins.is_measurement() {
                    [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]]
                } else {
                    [sig_of(qs.first(), &sx, &sz), sig_of(qs.get(1), &sx, &sz)]
                };
                locations[idx] = Some(Location {
                    ins: *ins,
                    meas: meas_of[idx],
                    sig,
                });
                match *ins {
                    Instruction::Idle(_) => {}
                    Instruction::H(q) => std::mem::swap(&mut sx[q], &mut sz[q]),
                    Instruction::Cx { control, target } => {
                        let t = sx[target].clone();
                        sx[control].xor_assign(&t);
                        let c = sz[control].clone();
                        sz[target].xor_assign(&c);
                    }
                    Instruction::MeasZ(q) => {
                        sx[q].flip(meas_of[idx] as usize);
                        sz[q] = BitVec::zeros(m);
                    }
                    Instruction::MeasX(q) => {
                        sz[q].flip(meas_of[idx] as usize);
                        sx[q] = BitVec::zeros(m);
                    }
                    Instruction::PrepZ(q) | Instruction::PrepX(q) => {
                        sx[q] = BitVec::zeros(m);
                        sz[q] = BitVec::zeros(m);
                    }
                }
            }
        }
        let noisy = circuit
            .layers
            .iter()
            .flat_map(|l| std::iter::repeat(!l.noiseless).take(l.instructions.len()))
            .enumerate()
            .filter_map(|(i, noisy)| noisy.then_some(i as u32))
            .collect();
        Ok(Self {
            reference,
            locations: locations.into_iter().map(|l| l.expect("every slot visited")).collect(),
            noisy,
            num_meas: m,
            boundary,
        })
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    /// Number of fault locations (instructions outside noiseless layers).
    pub fn num_locations(&self) -> usize {
        self.noisy.len()
    }

    pub fn num_measurements(&self) -> usize {
        self.num_meas
    }

    /// Measurement flips caused by `fault`.
    pub fn fault_effect(&self, fault: &Fault, out: &mut BitVec) {
        let loc = &self.locations[fault.location];
        let mut apply = |k: usize, p: Pauli| {
            if p.has_x() {
                for &i in &loc.sig[k][0] {
                    out.flip(i as usize);
                }
            }
            if p.has_z() {
                for &i in &loc.sig[k][1] {
                    out.flip(i as usize);
                }
            }
        };
        match fault.kind {
            FaultKind::Single(p) => apply(0, p),
            FaultKind::Pair(a, b) => {
                apply(0, a);
                apply(1, b);
            }
            FaultKind::MeasFlip => {
                if loc.meas != u32::MAX {
                    out.flip(loc.meas as usize);
                }
            }
        }
    }

    /// Measurement flips caused by a Pauli on data qubit `q` right after `layer`.
    pub fn data_pauli_effect(&self, layer: usize, q: usize, p: Pauli, out: &mut BitVec) {
        let (x, z) = &self.boundary[layer][q];
        if p.has_x() {
            for &i in x {
                out.flip(i as usize);
            }
        }
        if p.has_z() {
            for &i in z {
                out.flip(i as usize);
            }
        }
    }

    fn draw_fault(&self, location: usize, rng: &mut impl Rng) -> Fault {
        let kind = match self.locations[location].ins {
            Instruction::PrepZ(_) => FaultKind::Single(Pauli::X),
            Instruction::PrepX(_) => FaultKind::Single(Pauli::Z),
            Instruction::MeasZ(_) | Instruction::MeasX(_) => FaultKind::MeasFlip,
            Instruction::Cx { .. } => {
                let (a, b) = nonidentity_pair(rng.gen_range(0..15));
                FaultKind::Pair(a, b)
            }
            Instruction::Idle(_) | Instruction::H(_) => {
                FaultKind::Single([Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)])
            }
        };
        Fault { location, kind }
    }

    /// Samples one shot. `(seed, shot)` fully determines the result.
    pub fn sample(&self, noise: &NoiseModel, seed: u64, shot: u64, log_faults: bool) -> ShotRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        let mut bits = self.reference.outcomes.clone();
        let mut faults = Vec::new();
        let total = self.noisy.len();
        if noise.p > 0.0 {
            let mut next = 0usize;
            loop {
                // Geometric skip to the next faulty location.
                let skip = if noise.p >= 1.0 {
                    0
                } else {
                    let u: f64 = 1.0 - rng.gen::<f64>();
                    (u.ln() / (1.0 - noise.p).ln()).floor() as usize
                };
                next = match next.checked_add(skip) {
                    Some(n) if n < total => n,
                    _ => break,
                };
                let f = self.draw_fault(self.noisy[next] as usize, &mut rng);
                self.fault_effect(&f, &mut bits);
                if log_faults {
                    faults.push(f);
                }
                next += 1;
            }
        }
        ShotRecord { bits, faults }
    }

    /// Outcomes of a shot with exactly the given faults.
    pub fn with_faults(&self, faults: &[Fault]) -> ShotRecord {
        let mut bits = self.reference.outcomes.clone();
        for f in faults {
            self.fault_effect(f, &mut bits);
        }
        ShotRecord {
            bits,
            faults: faults.to_vec(),
        }
    }

    /// Every single fault the noise model can produce, with its measurement flips.
    pub fn enumerate_single_faults(&self, budget: usize) -> Result<Vec<(Fault, BitVec)>> {
        let mut out = Vec::new();
        for &i in &self.noisy {
            let i = i as usize;
            let loc = &self.locations[i];
            let kinds: Vec<FaultKind> = match loc.ins {
                Instruction::PrepZ(_) => vec![FaultKind::Single(Pauli::X)],
                Instruction::PrepX(_) => vec![FaultKind::Single(Pauli::Z)],
                Instruction::MeasZ(_) | Instruction::MeasX(_) => vec![FaultKind::MeasFlip],
                Instruction::Cx { .. } => (0..15)
                    .map(|k| {
                        let (a, b) = nonidentity_pair(k);
                        FaultKind::Pair(a, b)
                    })
                    .collect(),
                _ => vec![
                    FaultKind::Single(Pauli::X),
                    FaultKind::Single(Pauli::Y),
                    FaultKind::Single(Pauli::Z),
                ],
            };
            for kind in kinds {
                if out.len() >= budget {
                    return Err(Error::BudgetExceeded(format!(
                        "more than {budget} single faults"
                    )));
                }
                let f = Fault { location: i, kind };
                let mut flips = BitVec::zeros(self.num_meas);
                self.fault_effect(&f, &mut flips);
                out.push((f, flips));
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper: sample one shot from a freshly analysed circuit.
pub fn sample_shot(circuit: &Circuit, noise: &NoiseModel, seed: u64) -> Result<ShotRecord> {
    Ok(FrameSampler::new(circuit)?.sample(noise, seed, 0, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_enumeration_covers_all_nonidentity_pairs() {
        let mut seen: Vec<_> = (0..15).map(nonidentity_pair).collect();
        seen.sort_by_key(|&(a, b)| (a as u8, b as u8));
        seen.dedup();
        assert_eq!(seen.len(), 15);
        assert!(!seen.contains(&(Pauli::I, Pauli::I)));
    }

    #[test]
    fn noise_rejects_out_of_range() {
        assert!(NoiseModel::new(-0.1).is_err());
        assert!(NoiseModel::new(1.5).is_err());
        assert!(NoiseModel::new(0.0).is_ok());
    }
}
