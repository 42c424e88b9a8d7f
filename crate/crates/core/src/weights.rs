//! Conditional error probabilities and decoder weights.
//!
//! Each data qubit is keyed by the flags of every gadget (of the error's own
//! basis) on faces containing it; each face is keyed by its own gadget of the
//! dual basis. Key bits run over faces in increasing id, then flag position,
//! least significant bit first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_estimation_circuit, Circuit, EstimationSide, Method, SCHEDULE_VERSION,
};
use crate::code::{Basis, ColorCode, Family};
use crate::decoder::WeightAssignment;
use crate::deflag::Deflagger;
use crate::error::{Error, Result};
use crate::sim::{FrameSampler, NoiseModel, ShotRecord};

pub const TABLE_VERSION: u32 = 1;
/// Patterns seen fewer times than this use the location's unconditioned estimate.
pub const MIN_PATTERN_COUNT: u64 = 100;
const SHARD: u64 = 4096;

/// `-ln(q / (1 - q))`.
pub fn logit_weight(q: f64) -> f64 {
    debug_assert!(q > 0.0 && q < 1.0, "smooth probabilities before weighting");
    -(q / (1.0 - q)).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    Conventional,
    Flagged,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Uniform => "uniform",
            Scheme::Conventional => "conventional",
            Scheme::Flagged => "flagged",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Scheme::Uniform),
            "conventional" => Ok(Scheme::Conventional),
            "flagged" => Ok(Scheme::Flagged),
            _ => Err(Error::Invalid(format!("unknown weight scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub count: u64,
    pub errors: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.count += o.count;
        self.errors += o.errors;
    }

    /// Raw ratio `errors / count`, zero when unseen.
    pub fn raw(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.errors as f64 / self.count as f64
        }
    }

    /// `(errors + 1) / (count + 2)`.
    pub fn smoothed(&self) -> f64 {
        (self.errors as f64 + 1.0) / (self.count as f64 + 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Data,
    Face,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub version: u32,
    pub family: Family,
    pub distance: usize,
    pub method: Method,
    pub p: f64,
    pub samples: u64,
    pub deflag: bool,
    pub side: EstimationSide,
    pub seed: u64,
    pub schedule_version: u32,
}

/// Dense per-location histograms indexed by pattern key.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalProbTable {
    pub header: TableHeader,
    /// Key width of each data qubit and each face.
    pub data_width: Vec<usize>,
    pub face_width: Vec<usize>,
    pub data: Vec<Vec<Counts>>,
    pub faces: Vec<Vec<Counts>>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    kind: LocationKind,
    id: usize,
    pattern: String,
    count: u64,
    errors: u64,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    header: TableHeader,
    data_width: Vec<usize>,
    face_width: Vec<usize>,
    entries: Vec<Entry>,
}

fn pattern_string(key: usize, width: usize) -> String {
    (0..width).map(|i| if key >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn parse_pattern(s: &str, width: usize) -> Result<usize> {
    if s.len() != width {
        return Err(Error::Invalid(format!("pattern {s:?} has width {}, expected {width}", s.len())));
    }
    s.chars().enumerate().try_fold(0usize, |k, (i, c)| match c {
        '0' => Ok(k),
        '1' => Ok(k | 1 << i),
        _ => Err(Error::Invalid(format!("bad pattern {s:?}"))),
    })
}

impl ConditionalProbTable {
    /// Pattern-merged counts for a location.
    pub fn marginal(&self, kind: LocationKind, id: usize) -> Counts {
        let h = match kind {
            LocationKind::Data => &self.data[id],
            LocationKind::Face => &self.faces[id],
        };
        let mut c = Counts::default();
        for x in h {
            c.add(x);
        }
        c
    }

    pub fn counts(&self, kind: LocationKind, id: usize, key: usize) -> Counts {
        match kind {
            LocationKind::Data => self.data[id][key],
            LocationKind::Face => self.faces[id][key],
        }
    }

    /// Smoothed conditional probability with low-count fallback.
    pub fn conditional(&self, kind: LocationKind, id: usize, key: usize) -> f64 {
        let c = self.counts(kind, id, key);
        if c.count >= MIN_PATTERN_COUNT {
            c.smoothed()
        } else {
            self.unconditioned(kind, id)
        }
    }

    pub fn unconditioned(&self, kind: LocationKind, id: usize) -> f64 {
        self.marginal(kind, id).smoothed()
    }

    pub fn error_basis(&self) -> Basis {
        self.header.side.error_basis()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut entries = Vec::new();
        for (kind, hists, widths) in [
            (LocationKind::Data, &self.data, &self.data_width),
            (LocationKind::Face, &self.faces, &self.face_width),
        ] {
            for (id, h) in hists.iter().enumerate() {
                for (key, c) in h.iter().enumerate() {
                    if c.count > 0 {
                        entries.push(Entry {
                            kind,
                            id,
                            pattern: pattern_string(key, widths[id]),
                            count: c.count,
                            errors: c.errors,
                        });
                    }
                }
            }
        }
        Ok(serde_json::to_string_pretty(&TableFile {
            header: self.header.clone(),
            data_width: self.data_width.clone(),
            face_width: self.face_width.clone(),
            entries,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: TableFile = serde_json::from_str(s)?;
        if f.header.version != TABLE_VERSION {
            return Err(Error::Invalid(format!("unsupported table version {}", f.header.version)));
        }
        let mut data: Vec<Vec<Counts>> = f.data_width.iter().map(|&w| vec![Counts::default(); 1 << w]).collect();
        let mut faces: Vec<Vec<Counts>> = f.face_width.iter().map(|&w| vec![Counts::default(); 1 << w]).collect();
        for e in f.entries {
            let (hists, widths) = match e.kind {
                LocationKind::Data => (&mut data, &f.data_width),
                LocationKind::Face => (&mut faces, &f.face_width),
            };
            let w = *widths.get(e.id).ok_or_else(|| Error::Invalid(format!("location {} out of range", e.id)))?;
            let key = parse_pattern(&e.pattern, w)?;
            hists[e.id][key] = Counts { count: e.count, errors: e.errors };
        }
        Ok(Self {
            header: f.header,
            data_width: f.data_width,
            face_width: f.face_width,
            data,
            faces,
        })
    }
}

/// Measurement indices that form a location's pattern key for one round.
#[derive(Clone, Debug)]
struct KeyPlan {
    /// `data[v]`: flag measurements, or empty if the round has no such gadgets.
    data: Vec<Vec<usize>>,
    faces: Vec<Vec<usize>>,
}

fn key_of(shot: &ShotRecord, meas: &[usize]) -> usize {
    meas.iter()
        .enumerate()
        .fold(0, |k, (i, &m)| k | (shot.get(m) as usize) << i)
}

/// Flag measurements keying data qubits (gadgets of `data_basis`) and faces
/// (gadgets of the dual basis) in one round of a circuit.
fn key_plan(circuit: &Circuit, code: &ColorCode, round: usize, data_basis: Basis) -> KeyPlan {
    let flags_of = |basis: Basis, face: usize| -> Vec<usize> {
        let idx = circuit.gadget_index(basis);
        match idx.get(round - 1).and_then(|r| r.get(face)) {
            Some(&g) if g != usize::MAX => circuit.gadgets[g].flag_meas.clone(),
            _ => Vec::new(),
        }
    };
    let faces_of = code.faces_of_qubit();
    KeyPlan {
        data: (0..code.num_qubits())
            .map(|v| faces_of[v].iter().flat_map(|&f| flags_of(data_basis, f)).collect())
            .collect(),
        faces: (0..code.num_faces()).map(|f| flags_of(data_basis.dual(), f)).collect(),
    }
}

/// Runs the estimation circuit and accumulates flag-conditioned error counts.
pub fn estimate_conditional_probs(
    code: &ColorCode,
    method: Method,
    side: EstimationSide,
    noise: &NoiseModel,
    num_samples: u64,
    seed: u64,
    deflag: bool,
) -> Result<ConditionalProbTable> {
    if num_samples == 0 {
        return Err(Error::Invalid("estimation needs at least one sample".into()));
    }
    let circuit = build_estimation_circuit(code, method, side)?;
    let sampler = FrameSampler::new(&circuit)?;
    let deflagger = if deflag { Some(Deflagger::new(&circuit, &sampler)?) } else { None };
    let basis = side.error_basis();
    let plan = key_plan(&circuit, code, 1, basis);
    let syn = circuit.syndrome_index(basis.dual());
    let syn = &syn[0];
    let fin = circuit.final_data_index().expect("estimation circuits read out data");
    let reference = sampler.reference().outcomes.clone();
    let empty = || -> (Vec<Vec<Counts>>, Vec<Vec<Counts>>) {
        (
            plan.data.iter().map(|m| vec![Counts::default(); 1 << m.len()]).collect(),
            plan.faces.iter().map(|m| vec![Counts::default(); 1 << m.len()]).collect(),
        )
    };
    let shards = num_samples.div_ceil(SHARD);
    let partial: Vec<_> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let (mut data, mut faces) = empty();
            let mut err = vec![false; code.num_qubits()];
            for shot in s * SHARD..((s + 1) * SHARD).min(num_samples) {
                let mut rec = sampler.sample(noise, seed, shot, false);
                if let Some(d) = &deflagger {
                    d.apply_in_place(&mut rec);
                }
                for v in 0..code.num_qubits() {
                    err[v] = rec.get(fin[v]) ^ reference.get(fin[v]);
                    let c = &mut data[v][key_of(&rec, &plan.data[v])];
                    c.count += 1;
                    c.errors += err[v] as u64;
                }
                for f in &code.faces {
                    let ideal = f.support.iter().fold(false, |a, &v| a ^ err[v]);
                    let measured = rec.get(syn[f.id]) ^ reference.get(syn[f.id]);
                    let c = &mut faces[f.id][key_of(&rec, &plan.faces[f.id])];
                    c.count += 1;
                    c.errors += (ideal != measured) as u64;
                }
            }
            (data, faces)
        })
        .collect();
    let (mut data, mut faces) = empty();
    for (d, f) in partial {
        for (a, b) in data.iter_mut().zip(&d) {
            for (x, y) in a.iter_mut().zip(b) {
                x.add(y);
            }
        }
        for (a, b) in faces.iter_mut().zip(&f) {
            for (x, y) in a.iter_mut().zip(b) {
                x.add(y);
            }
        }
    }
    Ok(ConditionalProbTable {
        header: TableHeader {
            version: TABLE_VERSION,
            family: code.family,
            distance: code.distance,
            method,
            p: noise.p,
            samples: num_samples,
            deflag,
            side,
            seed,
            schedule_version: SCHEDULE_VERSION,
        },
        data_width: plan.data.iter().map(Vec::len).collect(),
        face_width: plan.faces.iter().map(Vec::len).collect(),
        data,
        faces,
    })
}

/// Per-shot weight builder for one memory circuit and decode basis.
#[derive(Clone, Debug)]
pub struct WeightModel {
    scheme: Scheme,
    rounds: usize,
    /// `data_plans[t-1]`: key measurements for `x^(t)`, or `None` when unconditioned.
    data_plans: Vec<Option<Vec<Vec<usize>>>>,
    face_plans: Vec<Vec<Vec<usize>>>,
    /// Weight lookup per location and key.
    data_w: Vec<Vec<f64>>,
    face_w: Vec<Vec<f64>>,
    data_w0: Vec<f64>,
    face_w0: Vec<f64>,
}

impl WeightModel {
    pub fn new(
        scheme: Scheme,
        table: Option<&ConditionalProbTable>,
        circuit: &Circuit,
        code: &ColorCode,
        decode_basis: Basis,
    ) -> Result<Self> {
        let rounds = circuit.syndrome_index(decode_basis.dual()).len();
        let n = code.num_qubits();
        let nf = code.num_faces();
        if scheme == Scheme::Uniform {
            return Ok(Self {
                scheme,
                rounds,
                data_plans: vec![None; rounds + 1],
                face_plans: Vec::new(),
                data_w: Vec::new(),
                face_w: Vec::new(),
                data_w0: vec![1.0; n],
                face_w0: vec![1.0; nf],
            });
        }
        let table = table.ok_or_else(|| Error::Invalid(format!("{scheme} weights need an estimated table")))?;
        if table.error_basis() != decode_basis {
            return Err(Error::Invalid(format!(
                "table estimates {} errors but decoding {} errors",
                table.error_basis(),
                decode_basis
            )));
        }
        if table.data.len() != n || table.faces.len() != nf {
            return Err(Error::ShapeMismatch("table does not match code".into()));
        }
        let data_w0: Vec<f64> = (0..n).map(|v| logit_weight(table.unconditioned(LocationKind::Data, v))).collect();
        let face_w0: Vec<f64> = (0..nf).map(|f| logit_weight(table.unconditioned(LocationKind::Face, f))).collect();
        let data_w = (0..n)
            .map(|v| {
                (0..table.data[v].len())
                    .map(|k| logit_weight(table.conditional(LocationKind::Data, v, k)))
                    .collect()
            })
            .collect();
        let face_w = (0..nf)
            .map(|f| {
                (0..table.faces[f].len())
                    .map(|k| logit_weight(table.conditional(LocationKind::Face, f, k)))
                    .collect()
            })
            .collect();
        let mut data_plans = Vec::with_capacity(rounds + 1);
        let mut face_plans = Vec::with_capacity(rounds);
        for t in 1..=rounds + 1 {
            // The flag round informing data errors of round t: the same cycle for
            // X errors (X half precedes the Z syndrome), the previous cycle's Z
            // half for Z errors.
            let flag_round = match decode_basis {
                Basis::X => (t <= rounds).then_some(t),
                Basis::Z => (t >= 2).then(|| t - 1),
            };
            data_plans.push(flag_round.map(|r| key_plan(circuit, code, r, decode_basis).data));
            if t <= rounds {
                face_plans.push(key_plan(circuit, code, t, decode_basis).faces);
            }
        }
        for plan in data_plans.iter().flatten() {
            for (v, m) in plan.iter().enumerate() {
                if m.len() != table.data_width[v] {
                    return Err(Error::ShapeMismatch(format!("data qubit {v}: key width differs from table")));
                }
            }
        }
        Ok(Self {
            scheme,
            rounds,
            data_plans,
            face_plans,
            data_w,
            face_w,
            data_w0,
            face_w0,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn assign(&self, shot: &ShotRecord) -> WeightAssignment {
        let flagged = self.scheme == Scheme::Flagged;
        let data = (0..=self.rounds)
            .map(|t| match (&self.data_plans[t], flagged) {
                (Some(plan), true) => plan
                    .iter()
                    .enumerate()
                    .map(|(v, m)| self.data_w[v][key_of(shot, m)])
                    .collect(),
                _ => self.data_w0.clone(),
            })
            .collect();
        let meas = (0..self.rounds)
            .map(|t| {
                if flagged {
                    self.face_plans[t]
                        .iter()
                        .enumerate()
                        .map(|(f, m)| self.face_w[f][key_of(shot, m)])
                        .collect()
                } else {
                    self.face_w0.clone()
                }
            })
            .collect();
        WeightAssignment { data, meas }
    }
}

/// One-shot convenience wrapper around [`WeightModel`].
pub fn build_weights(
    table: Option<&ConditionalProbTable>,
    scheme: Scheme,
    shot: &ShotRecord,
    circuit: &Circuit,
    code: &ColorCode,
    decode_basis: Basis,
) -> Result<WeightAssignment> {
    Ok(WeightModel::new(scheme, table, circuit, code, decode_basis)?.assign(shot))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_values() {
        assert_eq!(logit_weight(0.5), 0.0);
        assert!((logit_weight(1e-3) - 999f64.ln()).abs() < 1e-12);
        assert!(logit_weight(0.01) > logit_weight(0.02));
    }

    #[test]
    fn smoothing_stays_interior() {
        let c = Counts { count: 0, errors: 0 };
        assert_eq!(c.smoothed(), 0.5);
        let c = Counts { count: 10, errors: 10 };
        assert!(c.smoothed() < 1.0);
    }

    #[test]
    fn pattern_strings_round_trip() {
        for w in 0..5 {
            for k in 0..1 << w {
                assert_eq!(parse_pattern(&pattern_string(k, w), w).unwrap(), k);
            }
        }
    }
}
