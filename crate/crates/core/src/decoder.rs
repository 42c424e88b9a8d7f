//! Exact minimum-weight decoding over space-time parity constraints.
//!
//! Variables are data errors `x_v^(t)` for rounds `t = 1..=T+1` (the last one
//! precedes the ideal transversal readout) and measurement errors `r_f^(t)`
//! for `t = 1..=T`. Constraint `(f, t)` reads
//! `XOR_{v in f} x_v^(t) ^ r_f^(t) ^ r_f^(t-1) = delta_f^(t)`.

use std::fmt::Write;

use crate::circuit::Circuit;
use crate::code::{Basis, ColorCode};
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};
use crate::sim::ShotRecord;

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Per-variable weights for one shot.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightAssignment {
    /// `data[t-1][v]` for `t = 1..=T+1`.
    pub data: Vec<Vec<f64>>,
    /// `meas[t-1][f]` for `t = 1..=T`.
    pub meas: Vec<Vec<f64>>,
}

/// Shape of the space-time variable layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub num_data: usize,
    pub num_faces: usize,
    pub rounds: usize,
}

impl Layout {
    pub fn x(&self, t: usize, v: usize) -> usize {
        (t - 1) * self.num_data + v
    }

    pub fn r(&self, t: usize, f: usize) -> usize {
        (self.rounds + 1) * self.num_data + (t - 1) * self.num_faces + f
    }

    pub fn num_vars(&self) -> usize {
        (self.rounds + 1) * self.num_data + self.rounds * self.num_faces
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodingInstance {
    pub weights: Vec<f64>,
    /// Variables of each parity constraint.
    pub constraints: Vec<Vec<usize>>,
    pub detectors: Vec<bool>,
    pub layout: Option<Layout>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    BudgetExceeded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodingSolution {
    pub assignment: Vec<bool>,
    pub objective: f64,
    pub status: Status,
    pub nodes: u64,
}

/// Space-time constraint system for one code, before detectors are filled in.
pub fn space_time_constraints(code: &ColorCode, rounds: usize) -> (Layout, Vec<Vec<usize>>) {
    let layout = Layout {
        num_data: code.num_qubits(),
        num_faces: code.num_faces(),
        rounds,
    };
    let mut cons = Vec::with_capacity((rounds + 1) * code.num_faces());
    for t in 1..=rounds + 1 {
        for f in &code.faces {
            let mut c: Vec<usize> = f.support.iter().map(|&v| layout.x(t, v)).collect();
            if t <= rounds {
                c.push(layout.r(t, f.id));
            }
            if t >= 2 {
                c.push(layout.r(t - 1, f.id));
            }
            cons.push(c);
        }
    }
    (layout, cons)
}

/// Detector values `delta_f^(t)` (constraint order) from a shot.
pub fn detectors(shot: &ShotRecord, circuit: &Circuit, code: &ColorCode, decode_basis: Basis) -> Result<Vec<bool>> {
    let syn = circuit.syndrome_index(decode_basis.dual());
    let fin = circuit
        .final_data_index()
        .ok_or_else(|| Error::ShapeMismatch("circuit lacks a final data readout".into()))?;
    if syn.iter().any(|r| r.len() != code.num_faces()) || fin.len() != code.num_qubits() {
        return Err(Error::ShapeMismatch("circuit does not match code".into()));
    }
    let mut out = Vec::with_capacity((syn.len() + 1) * code.num_faces());
    for t in 0..=syn.len() {
        for f in &code.faces {
            let cur = if t < syn.len() {
                shot.get(syn[t][f.id])
            } else {
                f.support.iter().fold(false, |a, &v| a ^ shot.get(fin[v]))
            };
            let prev = t > 0 && shot.get(syn[t - 1][f.id]);
            out.push(cur ^ prev);
        }
    }
    Ok(out)
}

/// Assembles the instance for one shot.
pub fn build_instance(
    shot: &ShotRecord,
    circuit: &Circuit,
    code: &ColorCode,
    weights: &WeightAssignment,
    decode_basis: Basis,
) -> Result<DecodingInstance> {
    let det = detectors(shot, circuit, code, decode_basis)?;
    let rounds = det.len() / code.num_faces() - 1;
    let (layout, constraints) = space_time_constraints(code, rounds);
    if weights.data.len() != rounds + 1 || weights.meas.len() != rounds {
        return Err(Error::ShapeMismatch(format!(
            "weights cover {} data rounds, instance needs {}",
            weights.data.len(),
            rounds + 1
        )));
    }
    let mut w = vec![0.0; layout.num_vars()];
    for t in 1..=rounds + 1 {
        for v in 0..layout.num_data {
            w[layout.x(t, v)] = weights.data[t - 1][v];
        }
    }
    for t in 1..=rounds {
        for f in 0..layout.num_faces {
            w[layout.r(t, f)] = weights.meas[t - 1][f];
        }
    }
    Ok(DecodingInstance {
        weights: w,
        constraints,
        detectors: det,
        layout: Some(layout),
    })
}

impl DecodingInstance {
    pub fn num_vars(&self) -> usize {
        self.weights.len()
    }

    pub fn objective(&self, assignment: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(assignment)
            .filter(|(_, &a)| a)
            .map(|(w, _)| w)
            .sum()
    }

    pub fn satisfies(&self, assignment: &[bool]) -> bool {
        self.constraints
            .iter()
            .zip(&self.detectors)
            .all(|(c, &d)| c.iter().fold(false, |a, &j| a ^ assignment[j]) == d)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instance v1");
        let _ = writeln!(s, "vars {}", self.num_vars());
        for (j, w) in self.weights.iter().enumerate() {
            let _ = writeln!(s, "w {j} {w:?}");
        }
        for (c, &d) in self.constraints.iter().zip(&self.detectors) {
            let vars: Vec<String> = c.iter().map(|j| j.to_string()).collect();
            let _ = writeln!(s, "c {} {}", d as u8, vars.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut weights = Vec::new();
        let mut constraints = Vec::new();
        let mut detectors = Vec::new();
        let mut header = false;
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            let tok: Vec<&str> = raw.split_whitespace().collect();
            if tok.is_empty() || tok[0].starts_with('#') {
                continue;
            }
            if !header {
                if tok != ["instance", "v1"] {
                    return Err(err("expected `instance v1`"));
                }
                header = true;
                continue;
            }
            let int = |k: usize| -> Result<usize> {
                tok.get(k).ok_or_else(|| err("missing field"))?.parse().map_err(|_| err("expected integer"))
            };
            match tok[0] {
                "vars" => weights = vec![0.0; int(1)?],
                "w" => {
                    let j = int(1)?;
                    let w: f64 = tok.get(2).ok_or_else(|| err("missing weight"))?.parse().map_err(|_| err("bad weight"))?;
                    *weights.get_mut(j).ok_or_else(|| err("variable out of range"))? = w;
                }
                "c" => {
                    detectors.push(int(1)? == 1);
                    let vars = (2..tok.len()).map(int).collect::<Result<Vec<_>>>()?;
                    if vars.iter().any(|&j| j >= weights.len()) {
                        return Err(err("variable out of range"));
                    }
                    constraints.push(vars);
                }
                _ => return Err(err("unknown record")),
            }
        }
        Ok(Self {
            weights,
            constraints,
            detectors,
            layout: None,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Val {
    Free,
    Zero,
    One,
}

struct Search<'a> {
    w: &'a [f64],
    cons: &'a [Vec<usize>],
    var_cons: &'a [Vec<usize>],
    target: Vec<bool>,
    val: Vec<Val>,
    parity: Vec<bool>,
    free: Vec<u32>,
    cost: f64,
    best: f64,
    best_assign: Option<Vec<bool>>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
    // Scratch: number of violated constraints containing each variable.
    hits: Vec<u32>,
}

const EPS: f64 = 1e-9;

impl Search<'_> {
    fn set(&mut self, j: usize, v: Val) {
        self.val[j] = v;
        for &c in &self.var_cons[j] {
            self.free[c] -= 1;
            if v == Val::One {
                self.parity[c] ^= true;
            }
        }
        if v == Val::One {
            self.cost += self.w[j];
        }
    }

    fn unset(&mut self, j: usize) {
        let v = self.val[j];
        self.val[j] = Val::Free;
        for &c in &self.var_cons[j] {
            self.free[c] += 1;
            if v == Val::One {
                self.parity[c] ^= true;
            }
        }
        if v == Val::One {
            self.cost -= self.w[j];
        }
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        let violated: Vec<usize> = (0..self.cons.len())
            .filter(|&c| self.parity[c] != self.target[c])
            .collect();
        if violated.is_empty() {
            if self.cost < self.best - EPS {
                self.best = self.cost;
                self.best_assign = Some(self.val.iter().map(|&v| v == Val::One).collect());
            }
            return;
        }
        let mut pick = usize::MAX;
        let mut pick_free = u32::MAX;
        for &c in &violated {
            if self.free[c] == 0 {
                return;
            }
            if self.free[c] < pick_free {
                pick_free = self.free[c];
                pick = c;
            }
        }
        for &c in &violated {
            for &j in &self.cons[c] {
                if self.val[j] == Val::Free {
                    self.hits[j] += 1;
                }
            }
        }
        let mut bound = self.cost;
        for &c in &violated {
            let mut m = f64::INFINITY;
            for &j in &self.cons[c] {
                if self.val[j] == Val::Free {
                    m = m.min(self.w[j] / self.hits[j] as f64);
                }
            }
            bound += m;
        }
        for &c in &violated {
            for &j in &self.cons[c] {
                self.hits[j] = 0;
            }
        }
        if bound >= self.best - EPS {
            return;
        }
        let mut vars: Vec<usize> = self.cons[pick]
            .iter()
            .copied()
            .filter(|&j| self.val[j] == Val::Free)
            .collect();
        // Cheapest first finds a good incumbent early.
        vars.sort_by(|&a, &b| self.w[a].partial_cmp(&self.w[b]).expect("finite weights").then(a.cmp(&b)));
        for i in 0..vars.len() {
            for &j in &vars[..i] {
                self.set(j, Val::Zero);
            }
            self.set(vars[i], Val::One);
            self.dfs();
            self.unset(vars[i]);
            for &j in vars[..i].iter().rev() {
                self.unset(j);
            }
            if self.exhausted {
                return;
            }
        }
    }
}

/// Variables fixed by the linear system alone (rows of the reduced system
/// that mention a single variable).
fn forced_by_elimination(inst: &DecodingInstance) -> Vec<Option<bool>> {
    let n = inst.num_vars();
    let rows = inst
        .constraints
        .iter()
        .zip(&inst.detectors)
        .map(|(c, &d)| {
            let mut r = BitVec::zeros(n + 1);
            for &j in c {
                r.flip(j);
            }
            r.set(n, d);
            r
        })
        .collect();
    let mut m = BitMatrix::from_rows(n + 1, rows);
    let pivots = m.row_reduce();
    let mut out = vec![None; n];
    for (r, &p) in pivots.iter().enumerate() {
        if p == n {
            continue;
        }
        let row = m.row(r);
        if row.ones().filter(|&j| j < n).count() == 1 {
            out[p] = Some(row.get(n));
        }
    }
    out
}

/// Exact minimum-weight solution. With `budget` search nodes exhausted, the
/// best solution found so far (if any) is returned with `BudgetExceeded`.
pub fn decode(inst: &DecodingInstance, budget: u64) -> DecodingSolution {
    let n = inst.num_vars();
    // Substitute x -> 1 - x for negative weights.
    let flipped: Vec<bool> = inst.weights.iter().map(|&w| w < 0.0).collect();
    let w: Vec<f64> = inst.weights.iter().map(|w| w.abs()).collect();
    let offset: f64 = inst.weights.iter().filter(|&&w| w < 0.0).sum();
    let mut target = inst.detectors.clone();
    let mut var_cons = vec![Vec::new(); n];
    for (c, vars) in inst.constraints.iter().enumerate() {
        for &j in vars {
            var_cons[j].push(c);
            if flipped[j] {
                target[c] ^= true;
            }
        }
    }
    let mut s = Search {
        w: &w,
        cons: &inst.constraints,
        var_cons: &var_cons,
        target,
        val: vec![Val::Free; n],
        parity: vec![false; inst.constraints.len()],
        free: inst.constraints.iter().map(|c| c.len() as u32).collect(),
        cost: 0.0,
        best: f64::INFINITY,
        best_assign: None,
        nodes: 0,
        budget,
        exhausted: false,
        hits: vec![0; n],
    };
    let any_violated = s.parity.iter().zip(&s.target).any(|(a, b)| a != b);
    if any_violated {
        for (j, f) in forced_by_elimination(inst).into_iter().enumerate() {
            if let Some(v) = f {
                s.set(j, if v ^ flipped[j] { Val::One } else { Val::Zero });
            }
        }
    }
    s.dfs();
    let status = match (&s.best_assign, s.exhausted) {
        (_, true) => Status::BudgetExceeded,
        (Some(_), false) => Status::Optimal,
        (None, false) => Status::Infeasible,
    };
    let (assignment, objective) = match s.best_assign {
        Some(a) => {
            let a: Vec<bool> = a.iter().zip(&flipped).map(|(&x, &f)| x ^ f).collect();
            let obj = s.best + offset;
            (a, obj)
        }
        None => (vec![false; n], f64::INFINITY),
    };
    DecodingSolution {
        assignment,
        objective,
        status,
        nodes: s.nodes,
    }
}

/// Accumulated inferred data correction `u = XOR_t x^(t)`.
pub fn correction(solution: &DecodingSolution, layout: &Layout) -> Vec<bool> {
    let mut u = vec![false; layout.num_data];
    for t in 1..=layout.rounds + 1 {
        for (v, uv) in u.iter_mut().enumerate() {
            *uv ^= solution.assignment[layout.x(t, v)];
        }
    }
    u
}

/// Whether the residual error after correction flips the logical readout.
pub fn judge_logical_error(
    solution: &DecodingSolution,
    shot: &ShotRecord,
    circuit: &Circuit,
    code: &ColorCode,
    decode_basis: Basis,
) -> Result<bool> {
    let fin = circuit
        .final_data_index()
        .ok_or_else(|| Error::ShapeMismatch("circuit lacks a final data readout".into()))?;
    let layout = Layout {
        num_data: code.num_qubits(),
        num_faces: code.num_faces(),
        rounds: circuit.syndrome_index(decode_basis.dual()).len(),
    };
    if solution.assignment.len() != layout.num_vars() {
        return Err(Error::ShapeMismatch("solution does not match layout".into()));
    }
    let u = correction(solution, &layout);
    Ok(code
        .logical(decode_basis.dual())
        .iter()
        .fold(false, |a, &v| a ^ shot.get(fin[v]) ^ u[v]))
}
