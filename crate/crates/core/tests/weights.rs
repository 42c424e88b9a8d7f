mod common;

use colorflag::circuit::{build_estimation_circuit, build_memory_experiment, EstimationSide, MeasKind, Method};
use colorflag::deflag::Deflagger;
use colorflag::sim::{FrameSampler, NoiseModel};
use colorflag::weights::{
    estimate_conditional_probs, logit_weight, ConditionalProbTable, LocationKind, Scheme, WeightModel,
};
use colorflag::{Basis, ColorCode, Family};
use common::fault_weight;

fn table(family: Family, d: usize, side: EstimationSide, p: f64, n: u64, deflag: bool) -> ConditionalProbTable {
    let code = ColorCode::build(family, d).unwrap();
    estimate_conditional_probs(&code, Method::Flagged, side, &NoiseModel::new(p).unwrap(), n, 21, deflag).unwrap()
}

#[test]
fn noiseless_estimation_sees_no_errors_or_flags() {
    for family in [Family::C488, Family::C666] {
        for side in [EstimationSide::CX, EstimationSide::CZ] {
            let t = table(family, 3, side, 0.0, 2000, true);
            for (kind, hists) in [(LocationKind::Data, &t.data), (LocationKind::Face, &t.faces)] {
                for (id, h) in hists.iter().enumerate() {
                    assert_eq!(h[0].count, 2000, "{kind:?} {id}");
                    assert!(h.iter().all(|c| c.errors == 0 && c.raw() == 0.0));
                    assert_eq!(t.marginal(kind, id).count, 2000);
                }
            }
        }
    }
}

/// Re-simulates the estimation shots and tallies per-qubit errors and flag
/// firings directly, without pattern keys.
#[test]
fn marginals_match_direct_tallies() {
    let family = Family::C488;
    let d = 5;
    let n = 20_000;
    let p = 3e-3;
    let side = EstimationSide::CZ;
    let t = table(family, d, side, p, n, true);
    let code = ColorCode::build(family, d).unwrap();
    let c = build_estimation_circuit(&code, Method::Flagged, side).unwrap();
    let sampler = FrameSampler::new(&c).unwrap();
    let dfl = Deflagger::new(&c, &sampler).unwrap();
    let fin = c.final_data_index().unwrap();
    let reference = &sampler.reference().outcomes;
    let noise = NoiseModel::new(p).unwrap();
    let mut errors = vec![0u64; code.num_qubits()];
    let mut flag_fired = std::collections::HashMap::<usize, u64>::new();
    for shot in 0..n {
        let mut rec = sampler.sample(&noise, 21, shot, false);
        dfl.apply_in_place(&mut rec);
        for v in 0..code.num_qubits() {
            errors[v] += (rec.get(fin[v]) != reference.get(fin[v])) as u64;
        }
        for (m, k) in c.measurements.iter().enumerate() {
            if matches!(k, MeasKind::Flag { .. }) && rec.get(m) {
                *flag_fired.entry(m).or_default() += 1;
            }
        }
    }
    let faces_of = code.faces_of_qubit();
    for v in 0..code.num_qubits() {
        let m = t.marginal(LocationKind::Data, v);
        assert_eq!(m.count, n);
        assert_eq!(m.errors, errors[v], "qubit {v}");
        // Each key bit's firing count equals the direct count of its flag.
        let gadgets: Vec<_> = faces_of[v]
            .iter()
            .flat_map(|&f| {
                c.gadgets
                    .iter()
                    .filter(move |g| g.spec.face == f && g.spec.basis == side.error_basis())
                    .flat_map(|g| g.flag_meas.clone())
            })
            .collect();
        assert_eq!(gadgets.len(), t.data_width[v]);
        for (bit, meas) in gadgets.iter().enumerate() {
            let fired: u64 = t.data[v]
                .iter()
                .enumerate()
                .filter(|(k, _)| k >> bit & 1 == 1)
                .map(|(_, c)| c.count)
                .sum();
            assert_eq!(fired, flag_fired.get(meas).copied().unwrap_or(0));
        }
    }
    for f in 0..code.num_faces() {
        assert_eq!(t.marginal(LocationKind::Face, f).count, n);
    }
}

/// At small p the table must agree with a first-order expansion over every
/// single fault: P(error), P(flag fired) and P(error and fired) per location.
#[test]
fn table_matches_first_order_fault_expansion() {
    let family = Family::C488;
    let d = 5;
    let p = 1e-4;
    let n = 400_000;
    let side = EstimationSide::CX;
    let t = table(family, d, side, p, n, true);
    let code = ColorCode::build(family, d).unwrap();
    let c = build_estimation_circuit(&code, Method::Flagged, side).unwrap();
    let sampler = FrameSampler::new(&c).unwrap();
    let dfl = Deflagger::new(&c, &sampler).unwrap();
    let fin = c.final_data_index().unwrap();
    let reference = &sampler.reference().outcomes;
    let faces_of = code.faces_of_qubit();
    let faults = sampler.enumerate_single_faults(usize::MAX).unwrap();
    let records: Vec<(f64, _)> = faults
        .iter()
        .map(|(f, _)| {
            let mut rec = sampler.with_faults(&[*f]);
            dfl.apply_in_place(&mut rec);
            (fault_weight(&c, f) * p, rec)
        })
        .collect();
    for v in [0, 5, code.num_qubits() / 2, code.num_qubits() - 1] {
        let flags: Vec<usize> = faces_of[v]
            .iter()
            .flat_map(|&f| {
                c.gadgets
                    .iter()
                    .filter(move |g| g.spec.face == f && g.spec.basis == side.error_basis())
                    .flat_map(|g| g.flag_meas.clone())
            })
            .collect();
        let (mut pe, mut pf, mut pef) = (0.0, 0.0, 0.0);
        for (w, rec) in &records {
            let err = rec.get(fin[v]) != reference.get(fin[v]);
            let fired = flags.iter().any(|&m| rec.get(m));
            pe += w * err as u8 as f64;
            pf += w * fired as u8 as f64;
            pef += w * (err && fired) as u8 as f64;
        }
        let marginal = t.marginal(LocationKind::Data, v);
        let zero = t.data[v][0];
        let sampled_pf = 1.0 - zero.count as f64 / n as f64;
        let sampled_pef = (marginal.errors - zero.errors) as f64 / n as f64;
        for (name, sampled, predicted) in [("error", marginal.raw(), pe), ("flag", sampled_pf, pf), ("error&flag", sampled_pef, pef)] {
            let sigma = (predicted / n as f64).sqrt();
            // Second-order terms are O((20 p)^2), far below sigma here.
            assert!(
                (sampled - predicted).abs() < 4.0 * sigma + predicted * predicted,
                "qubit {v} {name}: sampled {sampled:.3e}, first order {predicted:.3e}"
            );
        }
        // Flags fire rarely but carry a large share of the error mass, so the
        // all-zero-pattern rate sits visibly below the merged rate.
        assert!(pf < 0.01 && pef / pe > 0.1);
        assert!(zero.raw() < marginal.raw());
    }
}

#[test]
fn table_json_round_trip() {
    let t = table(Family::C666, 3, EstimationSide::CX, 5e-3, 5000, false);
    let back = ConditionalProbTable::from_json(&t.to_json().unwrap()).unwrap();
    assert_eq!(back, t);
}

#[test]
fn one_flag_changes_only_local_weights() {
    let family = Family::C488;
    let d = 5;
    let code = ColorCode::build(family, d).unwrap();
    for basis in [Basis::X, Basis::Z] {
        let t = table(family, d, EstimationSide::for_errors(basis), 2e-3, 100_000, true);
        let c = build_memory_experiment(&code, Method::Flagged, basis).unwrap();
        let sampler = FrameSampler::new(&c).unwrap();
        let model = WeightModel::new(Scheme::Flagged, Some(&t), &c, &code, basis).unwrap();
        let base_rec = sampler.with_faults(&[]);
        let base = model.assign(&base_rec);
        let faces_of = code.faces_of_qubit();
        for g in c.gadgets.iter().filter(|g| g.round == 2) {
            for &m in &g.flag_meas {
                let mut rec = base_rec.clone();
                rec.bits.flip(m);
                let w = model.assign(&rec);
                for (t_idx, (a, b)) in base.data.iter().zip(&w.data).enumerate() {
                    for v in 0..code.num_qubits() {
                        if a[v] != b[v] {
                            assert!(faces_of[v].contains(&g.spec.face), "qubit {v} outside face {}", g.spec.face);
                            assert_eq!(g.spec.basis, basis);
                            // x^(t) listens to round t for X errors and round t-1 for Z errors.
                            let expect = if basis == Basis::X { 2 } else { 3 };
                            assert_eq!(t_idx + 1, expect);
                        }
                    }
                }
                for (t_idx, (a, b)) in base.meas.iter().zip(&w.meas).enumerate() {
                    for f in 0..code.num_faces() {
                        if a[f] != b[f] {
                            assert_eq!(f, g.spec.face);
                            assert_eq!(g.spec.basis, basis.dual());
                            assert_eq!(t_idx + 1, 2);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn uniform_and_conventional_ignore_flags() {
    let code = ColorCode::build(Family::C666, 3).unwrap();
    let t = table(Family::C666, 3, EstimationSide::CZ, 2e-3, 20_000, false);
    let c = build_memory_experiment(&code, Method::Flagged, Basis::Z).unwrap();
    let sampler = FrameSampler::new(&c).unwrap();
    let conv = WeightModel::new(Scheme::Conventional, Some(&t), &c, &code, Basis::Z).unwrap();
    let uni = WeightModel::new(Scheme::Uniform, None, &c, &code, Basis::Z).unwrap();
    let noise = NoiseModel::new(0.02).unwrap();
    let first = conv.assign(&sampler.sample(&noise, 1, 0, false));
    for shot in 1..50 {
        let rec = sampler.sample(&noise, 1, shot, false);
        assert_eq!(conv.assign(&rec), first);
        assert!(uni.assign(&rec).data.iter().flatten().all(|&w| w == 1.0));
    }
    let v0 = t.unconditioned(LocationKind::Data, 0);
    assert!((first.data[0][0] - logit_weight(v0)).abs() < 1e-12);
    // Flagged weights need a table of the matching error type.
    assert!(WeightModel::new(Scheme::Flagged, Some(&t), &c, &code, Basis::X).is_err());
}
