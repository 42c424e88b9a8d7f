#![allow(dead_code)]

use colorflag::decoder::DecodingInstance;
use rand::Rng;

/// Exhaustive minimum over all assignments; `None` when infeasible.
pub fn brute_force_min(inst: &DecodingInstance) -> Option<f64> {
    let n = inst.num_vars();
    assert!(n <= 24, "brute force limited to 24 variables");
    let masks: Vec<u32> = inst
        .constraints
        .iter()
        .map(|c| c.iter().fold(0u32, |m, &j| m ^ (1 << j)))
        .collect();
    let target: Vec<u32> = inst.detectors.iter().map(|&d| d as u32).collect();
    let mut best: Option<f64> = None;
    for x in 0u32..(1 << n) {
        if masks.iter().zip(&target).all(|(m, &t)| (m & x).count_ones() & 1 == t) {
            let cost: f64 = (0..n).filter(|j| x >> j & 1 == 1).map(|j| inst.weights[j]).sum();
            if best.map_or(true, |b| cost < b) {
                best = Some(cost);
            }
        }
    }
    best
}

/// Random sparse parity instance, feasible by construction unless `random_rhs`.
pub fn random_instance(rng: &mut impl Rng, max_vars: usize, random_rhs: bool) -> DecodingInstance {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=n + 4);
    let constraints: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let k = rng.gen_range(1..=n.min(6));
            let mut c: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
            c.sort_unstable();
            c
        })
        .collect();
    let weights: Vec<f64> = (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => rng.gen_range(-2.0..0.0),
            1 => rng.gen_range(0..4) as f64,
            _ => rng.gen_range(0.0..8.0),
        })
        .collect();
    let detectors = if random_rhs {
        (0..m).map(|_| rng.gen_bool(0.5)).collect()
    } else {
        let x: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        constraints.iter().map(|c| c.iter().fold(false, |a, &j| a ^ x[j])).collect()
    };
    DecodingInstance {
        weights,
        constraints,
        detectors,
        layout: None,
    }
}

use colorflag::code::{validate_code, Color};
use colorflag::{Basis, ColorCode, Family};

/// Data-qubit count read off the lattice pictures: (d^2 - 1)/2 + d for the
/// square-octagon code, (3d^2 + 1)/4 for the hexagonal one.
pub fn expected_data_qubits(family: Family, d: usize) -> usize {
    match family {
        Family::C488 => (d * d - 1) / 2 + d,
        Family::C666 => (3 * d * d + 1) / 4,
    }
}

/// Independent structural checks; returns a description of the first failure.
pub fn structural_check(code: &ColorCode) -> Result<(), String> {
    let n = code.num_qubits();
    if n != expected_data_qubits(code.family, code.distance) {
        return Err(format!("{n} data qubits"));
    }
    if !validate_code(code).is_valid() {
        return Err(format!("{:?}", validate_code(code).violations));
    }
    let sets: Vec<Vec<bool>> = code
        .faces
        .iter()
        .map(|f| {
            let mut s = vec![false; n];
            for &q in &f.support {
                s[q] = true;
            }
            s
        })
        .collect();
    let overlap = |a: &[bool], b: &[bool]| a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    for (i, a) in sets.iter().enumerate() {
        if !code.allowed_weights_contains(code.faces[i].support.len()) {
            return Err(format!("face {i} has weight {}", code.faces[i].support.len()));
        }
        for (j, b) in sets.iter().enumerate().skip(i + 1) {
            let o = overlap(a, b);
            if o % 2 == 1 {
                return Err(format!("faces {i} and {j} anticommute"));
            }
            if o > 0 && code.faces[i].color == code.faces[j].color {
                return Err(format!("adjacent faces {i} and {j} share a color"));
            }
        }
    }
    let colors = [Color::Red, Color::Green, Color::Blue];
    if !colors.iter().all(|c| code.faces.iter().any(|f| f.color == *c)) {
        return Err("fewer than three colors".into());
    }
    for q in 0..n {
        let k = sets.iter().filter(|s| s[q]).count();
        if !(1..=3).contains(&k) {
            return Err(format!("qubit {q} in {k} faces"));
        }
    }
    for basis in [Basis::X, Basis::Z] {
        let mut l = vec![false; n];
        for &q in code.logical(basis) {
            l[q] = true;
        }
        if sets.iter().any(|s| overlap(s, &l) % 2 == 1) {
            return Err(format!("logical {basis} does not commute with the stabilizers"));
        }
    }
    if overlap_of(code.logical(Basis::X), code.logical(Basis::Z)) % 2 == 0 {
        return Err("logical X and Z commute".into());
    }
    Ok(())
}

fn overlap_of(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|q| b.contains(q)).count()
}

trait AllowedWeights {
    fn allowed_weights_contains(&self, w: usize) -> bool;
}

impl AllowedWeights for ColorCode {
    fn allowed_weights_contains(&self, w: usize) -> bool {
        match self.family {
            Family::C488 => w == 4 || w == 8,
            Family::C666 => w == 4 || w == 6,
        }
    }
}

/// Minimum weight of a nontrivial logical by enumerating every subset of
/// qubits (Gray-code order). A stabilizer-commuting vector is a nontrivial
/// logical exactly when it overlaps the logical representative oddly.
pub fn brute_force_distance(code: &ColorCode) -> usize {
    let n = code.num_qubits();
    assert!(n <= 26);
    assert!(code.num_faces() <= 64);
    let face_masks: Vec<u64> = (0..n)
        .map(|q| {
            code.faces
                .iter()
                .enumerate()
                .filter(|(_, f)| f.support.contains(&q))
                .fold(0u64, |m, (i, _)| m | 1 << i)
        })
        .collect();
    let logical: u64 = code.logical(Basis::Z).iter().fold(0, |m, &q| m | 1 << q);
    let mut syn = 0u64;
    let mut x = 0u64;
    let mut best = usize::MAX;
    for i in 1u64..(1 << n) {
        let q = i.trailing_zeros() as usize;
        x ^= 1 << q;
        syn ^= face_masks[q];
        if syn == 0 && (x & logical).count_ones() % 2 == 1 {
            best = best.min(x.count_ones() as usize);
        }
    }
    best
}

use colorflag::circuit::{Circuit, Instruction};
use colorflag::sim::{Fault, FaultKind};

/// Probability of a single fault in units of p under the depolarizing model.
pub fn fault_weight(circuit: &Circuit, f: &Fault) -> f64 {
    match f.kind {
        FaultKind::Pair(..) => 1.0 / 15.0,
        FaultKind::MeasFlip => 1.0,
        FaultKind::Single(_) => match circuit.instructions().nth(f.location) {
            Some(Instruction::PrepZ(_) | Instruction::PrepX(_)) => 1.0,
            _ => 1.0 / 3.0,
        },
    }
}
