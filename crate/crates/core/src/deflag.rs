//! Flag-triggered Pauli-frame corrections.
//!
//! A fired two-qubit gadget flag applies the gadget's Pauli type to every data
//! qubit of its syndrome qubit. A four-qubit gadget applies it to the data of
//! the syndrome qubit and the top flag, and only when all three flags fire.
//! Corrections are never physical: their effect on later measurements is
//! precomputed and XORed into the shot record.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GadgetKind, GadgetSpec};
use crate::code::Basis;
use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::sim::{FrameSampler, Pauli, ShotRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Fires when the single flag is 1.
    AnyFlag,
    /// Fires only when every flag is 1.
    AllFlags,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeflagRule {
    pub kind: GadgetKind,
    pub trigger: Trigger,
    pub pauli: Pauli,
    pub targets: Vec<usize>,
}

/// The rule for one gadget; single-ancilla gadgets have no flags.
pub fn rule_for(spec: &GadgetSpec) -> Result<DeflagRule> {
    let pauli = Pauli::of_basis(spec.basis);
    match spec.kind {
        GadgetKind::TwoQubitFlag => Ok(DeflagRule {
            kind: spec.kind,
            trigger: Trigger::AnyFlag,
            pauli,
            targets: spec.data[0].clone(),
        }),
        GadgetKind::FourQubitFlag => {
            // Gadget qubit 3 is the top flag.
            let mut targets: Vec<usize> = spec.data[0].iter().chain(&spec.data[3]).copied().collect();
            targets.sort_unstable();
            Ok(DeflagRule {
                kind: spec.kind,
                trigger: Trigger::AllFlags,
                pauli,
                targets,
            })
        }
        GadgetKind::SingleAncilla => Err(Error::Unsupported(format!(
            "no deflag rule for single-ancilla gadget on face {}",
            spec.face
        ))),
    }
}

/// Data-qubit Paulis to record in the frame for the given flag outcomes.
pub fn deflag_update(flags: &[bool], rule: &DeflagRule) -> Vec<(usize, Pauli)> {
    let fire = match rule.trigger {
        Trigger::AnyFlag => flags.iter().any(|&f| f),
        Trigger::AllFlags => !flags.is_empty() && flags.iter().all(|&f| f),
    };
    if fire {
        rule.targets.iter().map(|&q| (q, rule.pauli)).collect()
    } else {
        Vec::new()
    }
}

#[derive(Clone, Debug)]
struct Entry {
    rule: DeflagRule,
    flag_meas: Vec<usize>,
    /// Measurements flipped when the rule fires.
    signature: Vec<u32>,
}

/// Deflag rules of every gadget instance in a circuit, in time order.
#[derive(Clone, Debug)]
pub struct Deflagger {
    entries: Vec<Entry>,
}

impl Deflagger {
    pub fn new(circuit: &Circuit, sampler: &FrameSampler) -> Result<Self> {
        let mut order: Vec<usize> = (0..circuit.gadgets.len())
            .filter(|&g| circuit.gadgets[g].spec.kind != GadgetKind::SingleAncilla)
            .collect();
        order.sort_by_key(|&g| (circuit.gadgets[g].end_layer, g));
        let mut entries = Vec::with_capacity(order.len());
        for g in order {
            let inst = &circuit.gadgets[g];
            let rule = rule_for(&inst.spec)?;
            let mut sig = BitVec::zeros(circuit.num_measurements());
            for &q in &rule.targets {
                sampler.data_pauli_effect(inst.end_layer, q, rule.pauli, &mut sig);
            }
            entries.push(Entry {
                rule,
                flag_meas: inst.flag_meas.clone(),
                signature: sig.ones().map(|i| i as u32).collect(),
            });
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Applies every triggered rule to the record in place.
    pub fn apply_in_place(&self, shot: &mut ShotRecord) {
        for e in &self.entries {
            let flags: Vec<bool> = e.flag_meas.iter().map(|&m| shot.bits.get(m)).collect();
            if !deflag_update(&flags, &e.rule).is_empty() {
                for &m in &e.signature {
                    shot.bits.flip(m as usize);
                }
            }
        }
    }

    /// Measurement flips of every rule, for auditing.
    pub fn signatures(&self) -> impl Iterator<Item = (&DeflagRule, &[usize], &[u32])> {
        self.entries
            .iter()
            .map(|e| (&e.rule, e.flag_meas.as_slice(), e.signature.as_slice()))
    }
}

/// Returns the shot with all triggered deflag updates folded into its outcomes.
pub fn apply_deflagging(shot: &ShotRecord, deflagger: &Deflagger) -> ShotRecord {
    let mut out = shot.clone();
    deflagger.apply_in_place(&mut out);
    out
}

/// Human-readable rule table for one cycle of a circuit.
pub fn dump_rules(circuit: &Circuit) -> Result<String> {
    let mut s = String::from("round\tbasis\tface\tgadget\ttrigger\tpauli\ttargets\n");
    for g in &circuit.gadgets {
        if g.spec.kind == GadgetKind::SingleAncilla {
            continue;
        }
        let r = rule_for(&g.spec)?;
        let targets: Vec<String> = r.targets.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{}",
            g.round,
            g.spec.basis,
            g.spec.face,
            r.kind,
            r.trigger,
            r.pauli,
            targets.join(",")
        );
    }
    Ok(s)
}

impl DeflagRule {
    pub fn basis(&self) -> Basis {
        if self.pauli == Pauli::X {
            Basis::X
        } else {
            Basis::Z
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(kind: GadgetKind, trigger: Trigger, n: usize) -> DeflagRule {
        DeflagRule {
            kind,
            trigger,
            pauli: Pauli::X,
            targets: (0..n).collect(),
        }
    }

    #[test]
    fn two_qubit_flag_applies_to_syndrome_side() {
        let r = rule(GadgetKind::TwoQubitFlag, Trigger::AnyFlag, 3);
        assert_eq!(deflag_update(&[true], &r).len(), 3);
        assert!(deflag_update(&[false], &r).is_empty());
    }

    #[test]
    fn four_qubit_requires_all_three_flags() {
        let r = rule(GadgetKind::FourQubitFlag, Trigger::AllFlags, 4);
        assert!(deflag_update(&[true, true, false], &r).is_empty());
        assert!(deflag_update(&[false, false, false], &r).is_empty());
        assert_eq!(deflag_update(&[true, true, true], &r).len(), 4);
    }
}
