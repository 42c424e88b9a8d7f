//! CNOT time-slot assignment.
//!
//! Single-ancilla cycles use a translation-invariant schedule: every face
//! touches the data qubit at a given offset from its center in the same time
//! slot. Flagged cycles use a bipartite edge coloring of the gadget-qubit /
//! data-qubit interaction graph with exactly three colors.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::code::{ColorCode, Face, FaceKind, Family};
use crate::error::{Error, Result};

/// Bumped whenever any generated schedule changes.
pub const SCHEDULE_VERSION: u32 = 1;

/// Offset of a qubit from a face center, quantized so that equal offsets compare equal.
type OffsetKey = (bool, i64, i64);

fn offset_key(code: &ColorCode, face: &Face, q: usize) -> OffsetKey {
    let (x, y) = code.positions[q];
    let (cx, cy) = face.center;
    (
        face.kind == FaceKind::Square,
        ((x - cx) * 1000.0).round() as i64,
        ((y - cy) * 1000.0).round() as i64,
    )
}

pub(crate) fn single_ancilla_depth(family: Family) -> usize {
    match family {
        Family::C488 => 8,
        Family::C666 => 6,
    }
}

/// Solves the offset-to-slot table on a large patch so that every offset
/// class of the bulk is present, whatever the requested distance.
fn slot_table(family: Family) -> &'static BTreeMap<OffsetKey, usize> {
    static C488: OnceLock<BTreeMap<OffsetKey, usize>> = OnceLock::new();
    static C666: OnceLock<BTreeMap<OffsetKey, usize>> = OnceLock::new();
    let cell = match family {
        Family::C488 => &C488,
        Family::C666 => &C666,
    };
    cell.get_or_init(|| {
        let template = ColorCode::build(family, 9).expect("template distance is valid");
        solve_slots(&template, single_ancilla_depth(family))
            .expect("bulk offset classes admit a schedule")
    })
}

fn solve_slots(code: &ColorCode, depth: usize) -> Option<BTreeMap<OffsetKey, usize>> {
    let mut classes: Vec<OffsetKey> = Vec::new();
    let mut per_qubit: Vec<Vec<OffsetKey>> = vec![Vec::new(); code.num_qubits()];
    for face in &code.faces {
        for &q in &face.support {
            let k = offset_key(code, face, q);
            if !classes.contains(&k) {
                classes.push(k);
            }
            per_qubit[q].push(k);
        }
    }
    classes.sort_unstable();
    let idx = |k: &OffsetKey| classes.binary_search(k).expect("known class");
    let mut conflicts = vec![vec![false; classes.len()]; classes.len()];
    for ks in &per_qubit {
        for a in ks {
            for b in ks {
                if a != b {
                    conflicts[idx(a)][idx(b)] = true;
                }
            }
        }
    }
    // Octagon/hexagon offsets of one face must also be pairwise distinct.
    for face in &code.faces {
        for &a in &face.support {
            for &b in &face.support {
                if a != b {
                    let (ka, kb) = (offset_key(code, face, a), offset_key(code, face, b));
                    conflicts[idx(&ka)][idx(&kb)] = true;
                }
            }
        }
    }
    let mut slots = vec![usize::MAX; classes.len()];
    fn go(i: usize, depth: usize, conflicts: &[Vec<bool>], slots: &mut [usize]) -> bool {
        if i == slots.len() {
            return true;
        }
        for s in 0..depth {
            if (0..i).all(|j| !conflicts[i][j] || slots[j] != s) {
                slots[i] = s;
                if go(i + 1, depth, conflicts, slots) {
                    return true;
                }
            }
        }
        slots[i] = usize::MAX;
        false
    }
    go(0, depth, &conflicts, &mut slots).then(|| classes.into_iter().zip(slots).collect())
}

/// Time slot (0-based, within the CNOT block) of each support qubit of each face.
pub fn single_ancilla_slots(code: &ColorCode) -> Result<Vec<Vec<usize>>> {
    let table = slot_table(code.family);
    let out: Vec<Vec<usize>> = code
        .faces
        .iter()
        .map(|f| {
            f.support
                .iter()
                .map(|&q| {
                    table.get(&offset_key(code, f, q)).copied().ok_or_else(|| {
                        Error::ScheduleConflict(format!("face {}: offset class not in table", f.id))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    check_slots(code, &out)?;
    Ok(out)
}

fn check_slots(code: &ColorCode, slots: &[Vec<usize>]) -> Result<()> {
    let mut used: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (f, face) in code.faces.iter().enumerate() {
        for (k, &q) in face.support.iter().enumerate() {
            if let Some(other) = used.insert((q, slots[f][k]), f) {
                return Err(Error::ScheduleConflict(format!(
                    "qubit {q} used by faces {other} and {f} in slot {}",
                    slots[f][k]
                )));
            }
        }
    }
    Ok(())
}

/// Properly colors the edges of a bipartite multigraph-free graph with
/// `colors` colors (must be at least the maximum degree). Alternating-path
/// recoloring keeps the result deterministic in edge order.
pub(crate) fn edge_color_bipartite(
    edges: &[(usize, usize)],
    num_left: usize,
    num_right: usize,
    colors: usize,
) -> Result<Vec<usize>> {
    let mut at_left = vec![vec![None::<usize>; colors]; num_left];
    let mut at_right = vec![vec![None::<usize>; colors]; num_right];
    let mut color = vec![usize::MAX; edges.len()];
    for (e, &(u, v)) in edges.iter().enumerate() {
        let a = (0..colors).find(|&c| at_left[u][c].is_none());
        let b = (0..colors).find(|&c| at_right[v][c].is_none());
        let (Some(a), Some(b)) = (a, b) else {
            return Err(Error::ScheduleConflict(format!(
                "degree exceeds {colors} at edge {e}"
            )));
        };
        if at_right[v][a].is_some() {
            // Swap colors a/b along the alternating path starting at v.
            let mut path = Vec::new();
            let mut on_right = true;
            let mut node = v;
            let mut want = a;
            loop {
                let next = if on_right {
                    at_right[node][want]
                } else {
                    at_left[node][want]
                };
                let Some(edge) = next else { break };
                path.push(edge);
                let (l, r) = edges[edge];
                node = if on_right { l } else { r };
                on_right = !on_right;
                want = if want == a { b } else { a };
            }
            for &edge in &path {
                let (l, r) = edges[edge];
                at_left[l][color[edge]] = None;
                at_right[r][color[edge]] = None;
            }
            for &edge in &path {
                let (l, r) = edges[edge];
                color[edge] = if color[edge] == a { b } else { a };
                at_left[l][color[edge]] = Some(edge);
                at_right[r][color[edge]] = Some(edge);
            }
        }
        debug_assert!(at_left[u][a].is_none() && at_right[v][a].is_none());
        color[e] = a;
        at_left[u][a] = Some(e);
        at_right[v][a] = Some(e);
    }
    Ok(color)
}
