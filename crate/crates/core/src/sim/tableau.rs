//! Aaronson–Gottesman stabilizer tableau.

use rand::Rng;

use crate::circuit::{Circuit, Instruction};
use crate::error::Result;
use crate::gf2::BitVec;

#[derive(Clone, Debug)]
pub struct Tableau {
    n: usize,
    words: usize,
    // Rows 0..n are destabilizers, n..2n stabilizers, 2n is scratch.
    x: Vec<Vec<u64>>,
    z: Vec<Vec<u64>>,
    r: Vec<bool>,
}

impl Tableau {
    /// The all-|0> state.
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        let mut t = Self {
            n,
            words,
            x: vec![vec![0; words]; 2 * n + 1],
            z: vec![vec![0; words]; 2 * n + 1],
            r: vec![false; 2 * n + 1],
        };
        for i in 0..n {
            t.x[i][i >> 6] |= 1 << (i & 63);
            t.z[n + i][i >> 6] |= 1 << (i & 63);
        }
        t
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn bit(v: &[u64], q: usize) -> bool {
        (v[q >> 6] >> (q & 63)) & 1 == 1
    }

    pub fn h(&mut self, q: usize) {
        let (w, m) = (q >> 6, 1u64 << (q & 63));
        for i in 0..2 * self.n {
            let (xb, zb) = (self.x[i][w] & m != 0, self.z[i][w] & m != 0);
            self.r[i] ^= xb && zb;
            if xb != zb {
                self.x[i][w] ^= m;
                self.z[i][w] ^= m;
            }
        }
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        for i in 0..2 * self.n {
            let (xc, zc) = (Self::bit(&self.x[i], c), Self::bit(&self.z[i], c));
            let (xt, zt) = (Self::bit(&self.x[i], t), Self::bit(&self.z[i], t));
            self.r[i] ^= xc && zt && (xt == zc);
            if xc {
                self.x[i][t >> 6] ^= 1 << (t & 63);
            }
            if zt {
                self.z[i][c >> 6] ^= 1 << (c & 63);
            }
        }
    }

    /// Applies Pauli X (`x`) and/or Z (`z`) to qubit `q`.
    pub fn pauli(&mut self, q: usize, x: bool, z: bool) {
        for i in 0..2 * self.n {
            let anti = (x && Self::bit(&self.z[i], q)) ^ (z && Self::bit(&self.x[i], q));
            self.r[i] ^= anti;
        }
    }

    fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
        match (x1, z1) {
            (false, false) => 0,
            (true, true) => z2 as i32 - x2 as i32,
            (true, false) => z2 as i32 * (2 * x2 as i32 - 1),
            (false, true) => x2 as i32 * (1 - 2 * z2 as i32),
        }
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let mut sum = 2 * self.r[h] as i32 + 2 * self.r[i] as i32;
        for q in 0..self.n {
            sum += Self::g(
                Self::bit(&self.x[i], q),
                Self::bit(&self.z[i], q),
                Self::bit(&self.x[h], q),
                Self::bit(&self.z[h], q),
            );
        }
        self.r[h] = sum.rem_euclid(4) == 2;
        for w in 0..self.words {
            let (xi, zi) = (self.x[i][w], self.z[i][w]);
            self.x[h][w] ^= xi;
            self.z[h][w] ^= zi;
        }
    }

    /// Z measurement. Returns `(outcome, deterministic)`.
    pub fn measure_z(&mut self, q: usize, rng: &mut impl Rng) -> (bool, bool) {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&i| Self::bit(&self.x[i], q)) {
            for i in 0..2 * n {
                if i != p && Self::bit(&self.x[i], q) {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p].clone();
            self.z[p - n] = self.z[p].clone();
            self.r[p - n] = self.r[p];
            self.x[p] = vec![0; self.words];
            self.z[p] = vec![0; self.words];
            self.z[p][q >> 6] |= 1 << (q & 63);
            let outcome = rng.gen::<bool>();
            self.r[p] = outcome;
            (outcome, false)
        } else {
            let s = 2 * n;
            self.x[s] = vec![0; self.words];
            self.z[s] = vec![0; self.words];
            self.r[s] = false;
            for i in 0..n {
                if Self::bit(&self.x[i], q) {
                    self.rowsum(s, i + n);
                }
            }
            (self.r[s], true)
        }
    }

    pub fn measure_x(&mut self, q: usize, rng: &mut impl Rng) -> (bool, bool) {
        self.h(q);
        let out = self.measure_z(q, rng);
        self.h(q);
        out
    }

    pub fn reset_z(&mut self, q: usize, rng: &mut impl Rng) {
        if self.measure_z(q, rng).0 {
            self.pauli(q, true, false);
        }
    }

    pub fn reset_x(&mut self, q: usize, rng: &mut impl Rng) {
        self.reset_z(q, rng);
        self.h(q);
    }

    /// Executes one instruction, returning a measurement result if any.
    pub fn apply(&mut self, ins: &Instruction, rng: &mut impl Rng) -> Option<(bool, bool)> {
        match *ins {
            Instruction::PrepZ(q) => self.reset_z(q, rng),
            Instruction::PrepX(q) => self.reset_x(q, rng),
            Instruction::H(q) => self.h(q),
            Instruction::Cx { control, target } => self.cx(control, target),
            Instruction::Idle(_) => {}
            Instruction::MeasZ(q) => return Some(self.measure_z(q, rng)),
            Instruction::MeasX(q) => return Some(self.measure_x(q, rng)),
        }
        None
    }
}

/// Noiseless outcomes of a circuit and which of them are deterministic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reference {
    pub outcomes: BitVec,
    pub deterministic: BitVec,
}

/// Runs the circuit noiselessly from |0...0>. Random outcomes are drawn from
/// a fixed-seed generator so the reference is reproducible.
pub fn reference_run(circuit: &Circuit) -> Result<Reference> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut t = Tableau::new(circuit.num_qubits());
    let m = circuit.num_measurements();
    let mut outcomes = BitVec::zeros(m);
    let mut deterministic = BitVec::zeros(m);
    let mut k = 0;
    for ins in circuit.instructions() {
        if let Some((v, det)) = t.apply(ins, &mut rng) {
            outcomes.set(k, v);
            deterministic.set(k, det);
            k += 1;
        }
    }
    Ok(Reference {
        outcomes,
        deterministic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn bell_pair_correlations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut t = Tableau::new(2);
            t.h(0);
            t.cx(0, 1);
            let (a, da) = t.measure_z(0, &mut rng);
            let (b, db) = t.measure_z(1, &mut rng);
            assert!(!da && db);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn plus_state_is_x_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut t = Tableau::new(1);
        t.reset_x(0, &mut rng);
        assert_eq!(t.measure_x(0, &mut rng), (false, true));
        t.pauli(0, false, true);
        assert_eq!(t.measure_x(0, &mut rng), (true, true));
    }
}
