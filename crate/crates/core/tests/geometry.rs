mod common;

use colorflag::code::{min_logical_weight, MIN_WEIGHT_BUDGET};
use colorflag::{Basis, ColorCode, Family};
use common::{brute_force_distance, structural_check};
use proptest::prelude::*;

const FAMILIES: [Family; 2] = [Family::C488, Family::C666];

#[test]
fn structure_holds_for_small_distances() {
    for f in FAMILIES {
        for d in [3, 5, 7, 9] {
            let code = ColorCode::build(f, d).unwrap();
            structural_check(&code).unwrap_or_else(|e| panic!("{f} d={d}: {e}"));
        }
    }
}

#[test]
fn enumerated_distance_equals_d() {
    for f in FAMILIES {
        for d in [3, 5] {
            let code = ColorCode::build(f, d).unwrap();
            assert_eq!(brute_force_distance(&code), d, "{f} d={d}");
        }
    }
}

#[test]
fn library_min_weight_agrees_with_enumeration() {
    for f in FAMILIES {
        for d in [3, 5] {
            let code = ColorCode::build(f, d).unwrap();
            for b in [Basis::X, Basis::Z] {
                assert_eq!(min_logical_weight(&code, b, MIN_WEIGHT_BUDGET).unwrap(), brute_force_distance(&code));
            }
        }
    }
}

#[test]
fn invalid_distances_are_rejected() {
    for f in FAMILIES {
        for d in [0, 1, 2, 4, 6] {
            assert!(ColorCode::build(f, d).is_err());
        }
    }
}

#[test]
fn json_survives_a_round_trip() {
    let code = ColorCode::build(Family::C488, 7).unwrap();
    assert_eq!(ColorCode::from_json(&code.to_json().unwrap()).unwrap(), code);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_qubit_syndrome_is_distinct_and_nonzero(fam in 0usize..2, k in 1usize..6) {
        // Single-qubit errors must be distinguishable for the code to correct them.
        let code = ColorCode::build(FAMILIES[fam], 2 * k + 1).unwrap();
        let fq = code.faces_of_qubit();
        let mut seen = std::collections::HashSet::new();
        for faces in &fq {
            prop_assert!(!faces.is_empty());
            let mut s = faces.clone();
            s.sort_unstable();
            prop_assert!(seen.insert(s));
        }
    }

    #[test]
    fn logical_has_weight_d(fam in 0usize..2, k in 1usize..6) {
        let d = 2 * k + 1;
        let code = ColorCode::build(FAMILIES[fam], d).unwrap();
        prop_assert_eq!(code.logical(Basis::X).len(), d);
        prop_assert_eq!(code.logical(Basis::Z).len(), d);
    }
}
