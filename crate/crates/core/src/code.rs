//! Triangular (4.8.8) and (6.6.6) color codes.
//!
//! Both families are built from integer lattice coordinates:
//!
//! * (6.6.6): points `(i, j)` of a triangular lattice with `i, j >= 0` and
//!   `i + j <= 3(d-1)/2`. Points with `(i - j) mod 3 == 1` are face centers,
//!   the rest are data qubits. A face's support is its in-patch lattice
//!   neighbours.
//! * (4.8.8): data qubits sit in 2x2 blocks on the even sublattice of a
//!   right isosceles patch `y <= x <= min(4d-4, 4d-2-y)`. Blocks are the
//!   square faces, the remaining cells are octagons, truncated to
//!   trapezoids along the boundaries.
//!
//! Data qubits are indexed row-major (by row, then column) over the patch.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "4.8.8")]
    C488,
    #[serde(rename = "6.6.6")]
    C666,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::C488 => "4.8.8",
            Family::C666 => "6.6.6",
        }
    }

    /// Number of data qubits at distance `d`.
    pub fn data_qubit_count(self, d: usize) -> usize {
        match self {
            Family::C488 => (d * d + 2 * d - 1) / 2,
            Family::C666 => (3 * d * d + 1) / 4,
        }
    }

    /// Number of faces (stabilizer generators of one Pauli type) at distance `d`.
    pub fn face_count(self, d: usize) -> usize {
        match self {
            Family::C488 => ((d + 1) / 2).pow(2) - 1,
            Family::C666 => 3 * (d * d - 1) / 8,
        }
    }

    pub fn allowed_weights(self) -> &'static [usize] {
        match self {
            Family::C488 => &[4, 8],
            Family::C666 => &[4, 6],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "4.8.8" | "488" | "c488" => Ok(Family::C488),
            "6.6.6" | "666" | "c666" => Ok(Family::C666),
            other => Err(Error::Invalid(format!("unknown code family '{other}'"))),
        }
    }
}

/// Pauli type of a stabilizer, error, or measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn dual(self) -> Basis {
        match self {
            Basis::X => Basis::Z,
            Basis::Z => Basis::X,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "X",
            Basis::Z => "Z",
        })
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Basis::X),
            "Z" | "z" => Ok(Basis::Z),
            other => Err(Error::Invalid(format!("unknown basis '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Red,
    Green,
    Blue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceKind {
    Square,
    Trapezoid,
    Hexagon,
    Octagon,
}

impl FaceKind {
    pub fn weight(self) -> usize {
        match self {
            FaceKind::Square | FaceKind::Trapezoid => 4,
            FaceKind::Hexagon => 6,
            FaceKind::Octagon => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub id: usize,
    pub color: Color,
    pub kind: FaceKind,
    /// Data qubits in cyclic order around the face center.
    pub support: Vec<usize>,
    /// Face center in the same Cartesian frame as the qubit positions.
    pub center: (f64, f64),
}

impl Face {
    pub fn weight(&self) -> usize {
        self.support.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorCode {
    pub family: Family,
    pub distance: usize,
    /// Cartesian position of each data qubit, indexed by qubit id.
    pub positions: Vec<(f64, f64)>,
    pub faces: Vec<Face>,
    pub logical_x: Vec<usize>,
    pub logical_z: Vec<usize>,
}

impl ColorCode {
    pub fn build(family: Family, distance: usize) -> Result<Self> {
        if distance < 3 || distance % 2 == 0 {
            return Err(Error::InvalidDistance(distance));
        }
        let raw = match family {
            Family::C488 => lattice_488(distance),
            Family::C666 => lattice_666(distance),
        };
        Ok(raw.finish(family, distance))
    }

    pub fn num_qubits(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Faces containing each data qubit, in increasing face id.
    pub fn faces_of_qubit(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_qubits()];
        for f in &self.faces {
            for &q in &f.support {
                out[q].push(f.id);
            }
        }
        out
    }

    /// Face-by-qubit incidence matrix; the same matrix checks both Pauli types.
    pub fn check_matrix(&self) -> BitMatrix {
        BitMatrix::from_rows(
            self.num_qubits(),
            self.faces
                .iter()
                .map(|f| BitVec::from_indices(self.num_qubits(), f.support.iter().copied()))
                .collect(),
        )
    }

    /// Face parities of a data bit pattern.
    pub fn syndrome(&self, bits: &BitVec) -> BitVec {
        self.check_matrix().mul_vec(bits)
    }

    pub fn logical(&self, basis: Basis) -> &[usize] {
        match basis {
            Basis::X => &self.logical_x,
            Basis::Z => &self.logical_z,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

struct RawFace {
    center: (f64, f64),
    color: Color,
    is_square_cell: bool,
    support: Vec<(i64, i64)>,
}

struct RawLattice {
    /// Integer coordinates of data qubits with their Cartesian positions.
    data: Vec<((i64, i64), (f64, f64))>,
    faces: Vec<RawFace>,
    logical: Vec<(i64, i64)>,
}

impl RawLattice {
    fn finish(mut self, family: Family, distance: usize) -> ColorCode {
        self.data.sort_by(|a, b| {
            (a.1 .1, a.1 .0)
                .partial_cmp(&(b.1 .1, b.1 .0))
                .expect("finite coordinates")
        });
        let index = |c: (i64, i64)| {
            self.data
                .iter()
                .position(|(k, _)| *k == c)
                .expect("support point is a data qubit")
        };
        let positions: Vec<(f64, f64)> = self.data.iter().map(|(_, p)| *p).collect();
        self.faces.sort_by(|a, b| {
            (a.center.1, a.center.0)
                .partial_cmp(&(b.center.1, b.center.0))
                .expect("finite coordinates")
        });
        let faces = self
            .faces
            .iter()
            .enumerate()
            .map(|(id, raw)| {
                let mut support: Vec<usize> = raw.support.iter().map(|&c| index(c)).collect();
                let (cx, cy) = raw.center;
                support.sort_by(|&a, &b| {
                    let ta = (positions[a].1 - cy).atan2(positions[a].0 - cx);
                    let tb = (positions[b].1 - cy).atan2(positions[b].0 - cx);
                    ta.partial_cmp(&tb).expect("finite angle")
                });
                let kind = match (family, support.len(), raw.is_square_cell) {
                    (Family::C488, 8, _) => FaceKind::Octagon,
                    (Family::C488, _, true) => FaceKind::Square,
                    (Family::C666, 6, _) => FaceKind::Hexagon,
                    _ => FaceKind::Trapezoid,
                };
                Face {
                    id,
                    color: raw.color,
                    kind,
                    support,
                    center: raw.center,
                }
            })
            .collect();
        let mut logical: Vec<usize> = self.logical.iter().map(|&c| index(c)).collect();
        logical.sort_unstable();
        ColorCode {
            family,
            distance,
            positions,
            faces,
            logical_x: logical.clone(),
            logical_z: logical,
        }
    }
}

fn lattice_666(d: usize) -> RawLattice {
    let l = 3 * (d as i64 - 1) / 2;
    let inside = |i: i64, j: i64| i >= 0 && j >= 0 && i + j <= l;
    let is_face = |i: i64, j: i64| (i - j).rem_euclid(3) == 1;
    let cart = |i: i64, j: i64| (i as f64 + 0.5 * j as f64, j as f64 * 3f64.sqrt() / 2.0);
    let mut data = Vec::new();
    let mut faces = Vec::new();
    for j in 0..=l {
        for i in 0..=(l - j) {
            if !is_face(i, j) {
                data.push(((i, j), cart(i, j)));
                continue;
            }
            let support = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)]
                .iter()
                .map(|(a, b)| (i + a, j + b))
                .filter(|&(a, b)| inside(a, b))
                .collect();
            let color = match i.rem_euclid(3) {
                0 => Color::Red,
                1 => Color::Green,
                _ => Color::Blue,
            };
            faces.push(RawFace {
                center: cart(i, j),
                color,
                is_square_cell: false,
                support,
            });
        }
    }
    let logical = (0..=l).filter(|&i| !is_face(i, 0)).map(|i| (i, 0)).collect();
    RawLattice {
        data,
        faces,
        logical,
    }
}

fn lattice_488(d: usize) -> RawLattice {
    let d = d as i64;
    let x_max = 4 * d - 4;
    let in_patch = |x: i64, y: i64| y >= 0 && y <= x && x <= x_max && x <= 4 * d - 2 - y;
    let is_data = |x: i64, y: i64| {
        if x % 2 != 0 || y % 2 != 0 || !in_patch(x, y) {
            return false;
        }
        let (cx, cy) = ((x / 2).rem_euclid(4), (y / 2).rem_euclid(4));
        match cy {
            1 | 2 => cx == 2 || cx == 3,
            _ => cx == 0 || cx == 1,
        }
    };
    let mut data = Vec::new();
    for y in (0..=2 * d - 2).step_by(2) {
        for x in (0..=x_max).step_by(2) {
            if is_data(x, y) {
                data.push(((x, y), (x as f64, y as f64)));
            }
        }
    }
    // Cell centers sit at (1 + 4i, 3 + 4j): squares where i + j is odd, octagons otherwise.
    // Bulk cells are those whose center lies in the patch; boundary trapezoids are
    // octagons below the base and along the left leg at rows 3 mod 8, and along the
    // right leg at rows 7 mod 8.
    let mut centers = BTreeSet::new();
    for cy in (-1..=2 * d).filter(|c| (c - 3).rem_euclid(4) == 0) {
        for cx in (-3..=x_max + 3).filter(|c| (c - 1).rem_euclid(4) == 0) {
            let bulk = in_patch(cx, cy);
            let base = cy == -1 && cx > 0 && cx.rem_euclid(8) == 5 && cx <= x_max;
            let left = cy == cx + 2 && cy.rem_euclid(8) == 3;
            let right = cx == 4 * d - cy && cy.rem_euclid(8) == 7;
            if bulk || base || left || right {
                centers.insert((cy, cx));
            }
        }
    }
    let mut faces = Vec::new();
    for (cy, cx) in centers {
        let (i, j) = ((cx - 1).div_euclid(4), (cy - 3).div_euclid(4));
        let square = (i + j).rem_euclid(2) == 1;
        let cand: Vec<(i64, i64)> = if square {
            [(-1, -1), (1, -1), (1, 1), (-1, 1)]
                .iter()
                .map(|(a, b)| (cx + a, cy + b))
                .collect()
        } else {
            let mut v = Vec::new();
            for (ox, oy) in [(4i64, 0i64), (-4, 0), (0, 4), (0, -4)] {
                for a in [-1i64, 1] {
                    for b in [-1i64, 1] {
                        if (ox + a).abs() + (oy + b).abs() == 4 {
                            v.push((cx + ox + a, cy + oy + b));
                        }
                    }
                }
            }
            v
        };
        let support: Vec<(i64, i64)> = cand.into_iter().filter(|&(x, y)| is_data(x, y)).collect();
        let color = if square {
            Color::Red
        } else if i.rem_euclid(2) == 0 {
            Color::Green
        } else {
            Color::Blue
        };
        faces.push(RawFace {
            center: (cx as f64, cy as f64),
            color,
            is_square_cell: square,
            support,
        });
    }
    let logical = data
        .iter()
        .map(|(c, _)| *c)
        .filter(|&(_, y)| y == 0)
        .collect();
    RawLattice {
        data,
        faces,
        logical,
    }
}

/// One broken invariant found by [`validate_code`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    QubitCount { expected: usize, actual: usize },
    FaceCount { expected: usize, actual: usize },
    FaceWeight { face: usize, weight: usize },
    KindMismatch { face: usize },
    QubitIndex { face: usize, qubit: usize },
    QubitDegree { qubit: usize, faces: usize },
    Coloring { a: usize, b: usize },
    Commutation { a: usize, b: usize },
    LogicalCommutation { basis: Basis, face: usize },
    LogicalAnticommutation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_code(code: &ColorCode) -> ValidationReport {
    let mut violations = Vec::new();
    let n = code.num_qubits();
    let expected = code.family.data_qubit_count(code.distance);
    if n != expected {
        violations.push(Violation::QubitCount {
            expected,
            actual: n,
        });
    }
    let expected = code.family.face_count(code.distance);
    if code.faces.len() != expected {
        violations.push(Violation::FaceCount {
            expected,
            actual: code.faces.len(),
        });
    }
    let allowed = code.family.allowed_weights();
    let mut sets = Vec::with_capacity(code.faces.len());
    for f in &code.faces {
        if !allowed.contains(&f.weight()) {
            violations.push(Violation::FaceWeight {
                face: f.id,
                weight: f.weight(),
            });
        } else if f.kind.weight() != f.weight() {
            violations.push(Violation::KindMismatch { face: f.id });
        }
        for &q in f.support.iter().filter(|&&q| q >= n) {
            violations.push(Violation::QubitIndex { face: f.id, qubit: q });
        }
        sets.push(f.support.iter().copied().collect::<BTreeSet<_>>());
    }
    let mut degree = vec![0usize; n];
    for s in &sets {
        for &q in s.iter().filter(|&&q| q < n) {
            degree[q] += 1;
        }
    }
    for (q, &c) in degree.iter().enumerate() {
        if c > 3 {
            violations.push(Violation::QubitDegree { qubit: q, faces: c });
        }
    }
    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            let shared = sets[a].intersection(&sets[b]).count();
            if shared % 2 == 1 {
                violations.push(Violation::Commutation { a, b });
            }
            if shared >= 2 && code.faces[a].color == code.faces[b].color {
                violations.push(Violation::Coloring { a, b });
            }
        }
    }
    for basis in [Basis::X, Basis::Z] {
        let l: BTreeSet<usize> = code.logical(basis).iter().copied().collect();
        for (f, s) in sets.iter().enumerate() {
            if s.intersection(&l).count() % 2 == 1 {
                violations.push(Violation::LogicalCommutation { basis, face: f });
            }
        }
    }
    let lx: BTreeSet<usize> = code.logical_x.iter().copied().collect();
    let lz: BTreeSet<usize> = code.logical_z.iter().copied().collect();
    if lx.intersection(&lz).count() % 2 == 0 {
        violations.push(Violation::LogicalAnticommutation);
    }
    ValidationReport { violations }
}

/// Default cap on the number of stabilizer-kernel elements visited by
/// [`min_logical_weight`].
pub const MIN_WEIGHT_BUDGET: u64 = 1 << 24;

/// Minimum weight of a `pauli_type` operator that commutes with every
/// stabilizer of the opposite type and anticommutes with the opposite-type
/// logical, found by enumerating the kernel of the check matrix.
pub fn min_logical_weight(code: &ColorCode, pauli_type: Basis, budget: u64) -> Result<usize> {
    let n = code.num_qubits();
    if n > 64 {
        return Err(Error::BudgetExceeded(format!("{n} qubits exceeds 64-bit search")));
    }
    let basis = code.check_matrix().kernel_basis();
    let dim = basis.len() as u32;
    if dim >= 63 || (1u64 << dim) > budget {
        return Err(Error::BudgetExceeded(format!(
            "kernel dimension {dim} exceeds budget {budget}"
        )));
    }
    let to_mask = |v: &BitVec| v.words().first().copied().unwrap_or(0);
    let gens: Vec<u64> = basis.iter().map(to_mask).collect();
    let logical = code
        .logical(pauli_type.dual())
        .iter()
        .fold(0u64, |m, &q| m | (1 << q));
    let mut best = usize::MAX;
    let mut cur = 0u64;
    // Gray-code walk over all kernel elements.
    for k in 1u64..(1u64 << dim) {
        cur ^= gens[k.trailing_zeros() as usize];
        if (cur & logical).count_ones() % 2 == 1 {
            best = best.min(cur.count_ones() as usize);
        }
    }
    if best == usize::MAX {
        return Err(Error::Invalid("no logical operator found".into()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_or_small_distance() {
        for d in [0, 1, 2, 4, 6] {
            assert!(matches!(
                ColorCode::build(Family::C488, d),
                Err(Error::InvalidDistance(_))
            ));
        }
    }

    #[test]
    fn small_codes_have_expected_sizes() {
        let c = ColorCode::build(Family::C488, 3).unwrap();
        assert_eq!((c.num_qubits(), c.num_faces()), (7, 3));
        assert!(c.faces.iter().all(|f| f.weight() == 4));
        let c = ColorCode::build(Family::C666, 3).unwrap();
        assert_eq!((c.num_qubits(), c.num_faces()), (7, 3));
        let c = ColorCode::build(Family::C488, 5).unwrap();
        assert_eq!((c.num_qubits(), c.num_faces()), (17, 8));
        assert_eq!(
            c.faces.iter().filter(|f| f.kind == FaceKind::Octagon).count(),
            1
        );
    }

    #[test]
    fn valid_codes_pass_validation() {
        for fam in [Family::C488, Family::C666] {
            for d in [3, 5, 7] {
                let c = ColorCode::build(fam, d).unwrap();
                let r = validate_code(&c);
                assert!(r.is_valid(), "{fam} d={d}: {:?}", r.violations);
            }
        }
    }

    #[test]
    fn mutated_support_breaks_commutation() {
        let mut c = ColorCode::build(Family::C488, 3).unwrap();
        let extra = (0..c.num_qubits())
            .find(|q| !c.faces[0].support.contains(q))
            .unwrap();
        c.faces[0].support[0] = extra;
        let r = validate_code(&c);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Commutation { .. })));
    }

    #[test]
    fn same_colored_neighbours_break_coloring() {
        let mut c = ColorCode::build(Family::C666, 3).unwrap();
        c.faces[1].color = c.faces[0].color;
        let r = validate_code(&c);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Coloring { .. })));
    }

    #[test]
    fn construction_is_deterministic() {
        let a = ColorCode::build(Family::C488, 5).unwrap();
        let b = ColorCode::build(Family::C488, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_roundtrip() {
        let c = ColorCode::build(Family::C666, 5).unwrap();
        let back = ColorCode::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
