//! The generic measurement-displacement rewrite.
//!
//! Given a scenario with a two-qubit projective setting, rewrite it so
//! that the setting becomes a pure computational readout: the prepared
//! state gains the localization protocol's Bell pairs and the V ⊗ W
//! preparation, the target setting reads every protocol wire and decodes
//! classically (failure branches map to a reserved "abort" class), and
//! every other setting touching the two qubits first applies V† and/or
//! W† on its side to restore the original state. Conditioned on the
//! protocol succeeding, the rewritten behavior equals the original.

use super::{Instrument, OutcomeClass, Scenario, StateCtor};
use crate::localize::{build_with_wires, decode, TargetClass, TargetMeasurement};
use crate::qsim::{dense_cap, GateOp, Register};
use crate::{Error, Result};

/// The reserved outcome label carrying the protocol's failure branches.
pub const ABORT_LABEL: &str = "abort";

/// Displace the setting `label` of `party` into the prepared state,
/// using a localization protocol with the given level count.
pub fn displace_measurement(
    sc: &Scenario,
    party: &str,
    label: &str,
    levels: usize,
) -> Result<Scenario> {
    let (ri, si, ii) = sc.find_instrument(party, label).ok_or_else(|| {
        Error::BadScenario(format!("party `{party}` has no setting `{label}`"))
    })?;
    let target_instr = &sc.rounds[ri].slots[si].settings[ii];

    if target_instr.sites.len() != 2 {
        return Err(Error::UnsupportedMeasurementShape(format!(
            "a two-qubit setting; `{label}` measures {} sites",
            target_instr.sites.len()
        )));
    }
    let site_a = target_instr.sites[0].clone();
    let site_b = target_instr.sites[1].clone();
    for site in [&site_a, &site_b] {
        if sc.register.site_dim(site)? != 2 {
            return Err(Error::UnsupportedMeasurementShape(format!(
                "qubit sites; `{site}` has dimension {}",
                sc.register.site_dim(site)?
            )));
        }
    }
    if target_instr
        .rotation
        .iter()
        .any(|g| g.targets().iter().any(|t| !target_instr.sites.contains(t)))
    {
        return Err(Error::UnsupportedMeasurementShape(
            "a rotation confined to the measured qubits".into(),
        ));
    }

    // The target as a measurement: effect vectors of the raw outcomes.
    let measured = target_instr.measured_register(&sc.register)?;
    let eigenvectors: Vec<Vec<crate::C64>> = (0..4)
        .map(|raw| Ok(target_instr.effect_vector(&measured, raw)?.amplitudes().to_vec()))
        .collect::<Result<_>>()?;
    let classes: Vec<TargetClass> = target_instr
        .classes
        .iter()
        .map(|c| TargetClass { label: c.label.clone(), members: c.outcomes.clone() })
        .collect();
    let target = TargetMeasurement::new(eigenvectors, classes)?;

    // Fresh ancilla prefix: one displacement may follow another.
    let generation = sc
        .register
        .labels()
        .iter()
        .filter_map(|l| {
            l.strip_prefix("anc")
                .and_then(|rest| rest.split('.').next())
                .and_then(|n| n.parse::<usize>().ok())
        })
        .max()
        .map_or(0, |n| n + 1);
    let prefix = format!("anc{generation}.");
    let circuit = build_with_wires(&target, levels, &site_a, &site_b, &prefix)?;

    let wires = circuit.wire_order();
    if wires.len() as u32 > dense_cap() {
        return Err(Error::DenseCapExceeded { dim: 1usize << wires.len().min(63), cap: dense_cap() });
    }

    // Extended register: ancilla qubits appended in ledger order.
    let mut sites: Vec<(String, usize)> = sc
        .register
        .sites()
        .iter()
        .map(|s| (s.label.clone(), s.dim))
        .collect();
    for pair in &circuit.ledger {
        sites.push((pair.alice.clone(), 2));
        sites.push((pair.bob.clone(), 2));
    }
    let register = Register::new(sites)?;

    // Preparation: Bell pairs, then W, then V (disjoint custody).
    let mut initial = sc.initial.clone();
    for pair in &circuit.ledger {
        initial.push(StateCtor::Bell { a: pair.alice.clone(), b: pair.bob.clone() });
    }
    let expand = |cg: &crate::localize::CircuitGate| -> GateOp {
        if cg.controls.is_empty() {
            cg.gate.clone()
        } else {
            cg.gate.controlled(&cg.controls)
        }
    };
    for cg in circuit.bob_gates.iter().chain(&circuit.alice_gates) {
        initial.push(StateCtor::Gate(expand(cg)));
    }

    // The rewritten setting: read every wire and decode.
    let mut class_order: Vec<String> = target_instr.classes.iter().map(|c| c.label.clone()).collect();
    class_order.push(ABORT_LABEL.to_string());
    let mut grouped: Vec<(String, Vec<usize>)> =
        class_order.into_iter().map(|l| (l, vec![])).collect();
    let nwires = wires.len();
    for raw in 0..(1usize << nwires) {
        let bits: Vec<u8> = (0..nwires)
            .map(|i| ((raw >> (nwires - 1 - i)) & 1) as u8)
            .collect();
        let decoded = decode(&bits, &circuit)?;
        let class = decoded
            .class_label
            .unwrap_or_else(|| ABORT_LABEL.to_string());
        grouped
            .iter_mut()
            .find(|(l, _)| *l == class)
            .expect("decoded label is a target class or abort")
            .1
            .push(raw);
    }
    let rewritten = Instrument::new(
        label,
        vec![],
        wires.clone(),
        grouped
            .into_iter()
            .filter(|(_, outcomes)| !outcomes.is_empty())
            .map(|(label, outcomes)| OutcomeClass { label, outcomes })
            .collect::<Vec<_>>(),
    );

    // Restoration prefixes for every other setting touching the pair.
    let v_dagger: Vec<GateOp> = circuit
        .alice_gates
        .iter()
        .rev()
        .map(|cg| expand(cg).dagger())
        .collect();
    let w_dagger: Vec<GateOp> = circuit
        .bob_gates
        .iter()
        .rev()
        .map(|cg| expand(cg).dagger())
        .collect();
    let alice_wires = circuit.alice_wires();
    let bob_wires = circuit.bob_wires();

    let mut rounds = sc.rounds.clone();
    for (r, round) in rounds.iter_mut().enumerate() {
        for (s, slot) in round.slots.iter_mut().enumerate() {
            let mut needs_alice = false;
            let mut needs_bob = false;
            for (i, instr) in slot.settings.iter_mut().enumerate() {
                if r == ri && s == si && i == ii {
                    *instr = rewritten.clone();
                    needs_alice = true;
                    needs_bob = true;
                    continue;
                }
                let touches_a = instr.support().contains(&site_a);
                let touches_b = instr.support().contains(&site_b);
                if touches_b {
                    for g in w_dagger.iter().rev() {
                        instr.rotation.insert(0, g.clone());
                    }
                    needs_bob = true;
                }
                if touches_a {
                    for g in v_dagger.iter().rev() {
                        instr.rotation.insert(0, g.clone());
                    }
                    needs_alice = true;
                }
            }
            if needs_alice {
                for w in &alice_wires {
                    if !slot.custody.contains(w) {
                        slot.custody.push(w.clone());
                    }
                }
            }
            if needs_bob {
                for w in &bob_wires {
                    if !slot.custody.contains(w) {
                        slot.custody.push(w.clone());
                    }
                }
            }
        }
    }

    Ok(Scenario {
        name: format!("{}+displaced-{party}-{label}", sc.name),
        register,
        initial,
        rounds,
        alignment: sc.alignment.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entangle::{measurement_verdict, Bipartition};
    use crate::scenario::{behavior, build_builtin, cell_tv, toy_two_entangled};
    use approx::assert_abs_diff_eq;

    #[test]
    fn displaced_rabelo_c3_replicates_conditionally() {
        let original = build_builtin("rabelo-original").unwrap();
        let displaced = displace_measurement(&original, "C", "C3", 1).unwrap();
        assert_eq!(displaced.register.len(), 4 + 6);

        let t_orig = behavior(&original).unwrap();
        let t_disp = behavior(&displaced).unwrap();

        // Success probability 1/4 in every cell involving C3 (setting 2).
        let round = t_disp.round("main").unwrap();
        let abort = round.label_mass("C", ABORT_LABEL).unwrap();
        for (combo, mass) in &abort {
            if combo[1] == 2 {
                assert_abs_diff_eq!(*mass, 0.75, epsilon = 1e-9);
            } else {
                assert_abs_diff_eq!(*mass, 0.0, epsilon = 1e-12);
            }
        }

        // Conditioned on success, the behavior equals the original.
        let conditioned = round.conditioned("C", ABORT_LABEL).unwrap();
        let orig_round = t_orig.round("main").unwrap();
        for (combo, cell) in &conditioned.cells {
            let tv = cell_tv(cell, &orig_round.cells[combo]);
            assert!(tv < 1e-9, "cell {combo:?}: TV = {tv}");
        }

        // The rewritten setting is a bare readout: product across every
        // cut, in particular the extended C_A ∣ C_B cut.
        let circuit_cut = Bipartition::new(
            vec!["CA", "anc0.p0.a", "anc0.p1.a", "anc0.p2.a"],
            vec!["CB", "anc0.p0.b", "anc0.p1.b", "anc0.p2.b"],
        )
        .unwrap();
        let c3 = &displaced.rounds[0].slots[1].settings[2];
        let verdict = measurement_verdict(c3, &displaced.register, &circuit_cut).unwrap();
        assert!(!verdict.entangled());
    }

    #[test]
    fn displacing_a_computational_setting_is_an_identity_rewrite() {
        // A setting that is already computational: conditioned on
        // success the distribution is unchanged, and only the level-1
        // success port contributes.
        let mut sc = toy_two_entangled().unwrap();
        sc.rounds[0].slots[0].settings[0] = Instrument::computational(&["c1", "c2"], 4);
        sc.rounds[0].slots[0].settings[0].label = "MC".into();
        let before = behavior(&sc).unwrap();
        let displaced = displace_measurement(&sc, "C", "MC", 1).unwrap();
        let after = behavior(&displaced).unwrap();
        let conditioned = after.rounds[0].conditioned("C", ABORT_LABEL).unwrap();
        for (combo, cell) in &conditioned.cells {
            assert!(cell_tv(cell, &before.rounds[0].cells[combo]) < 1e-9);
        }
    }

    #[test]
    fn iterated_displacement_removes_both_entangled_measurements() {
        let toy = toy_two_entangled().unwrap();

        // Both settings start entangled across their pair.
        let cut_c = Bipartition::new(vec!["c1"], vec!["c2"]).unwrap();
        let cut_d = Bipartition::new(vec!["d1"], vec!["d2"]).unwrap();
        let mc = &toy.rounds[0].slots[0].settings[0];
        let md = &toy.rounds[0].slots[1].settings[0];
        assert!(measurement_verdict(mc, &toy.register, &cut_c).unwrap().entangled());
        assert!(measurement_verdict(md, &toy.register, &cut_d).unwrap().entangled());

        let once = displace_measurement(&toy, "C", "MC", 1).unwrap();
        let twice = displace_measurement(&once, "D", "MD", 1).unwrap();

        // No entangled verdict remains: every instrument is product
        // across every bipartition of its own support.
        for round in &twice.rounds {
            for slot in &round.slots {
                for instr in &slot.settings {
                    let support: Vec<String> = instr.support().into_iter().collect();
                    for k in 1..support.len() {
                        let cut = Bipartition::new(
                            support[..k].to_vec(),
                            support[k..].to_vec(),
                        )
                        .unwrap();
                        let verdict =
                            measurement_verdict(instr, &twice.register, &cut).unwrap();
                        assert!(
                            !verdict.entangled(),
                            "instrument `{}` entangled across {:?}",
                            instr.label,
                            cut
                        );
                    }
                }
            }
        }

        // And the doubly-conditioned behavior still matches the toy.
        let before = behavior(&toy).unwrap();
        let after = behavior(&twice).unwrap();
        let conditioned = after.rounds[0]
            .conditioned("C", ABORT_LABEL)
            .unwrap()
            .conditioned("D", ABORT_LABEL)
            .unwrap();
        for (combo, cell) in &conditioned.cells {
            assert!(cell_tv(cell, &before.rounds[0].cells[combo]) < 1e-9);
        }
    }

    #[test]
    fn displacement_rejects_non_two_qubit_targets() {
        let sc = build_builtin("bancal-classical").unwrap();
        assert!(matches!(
            displace_measurement(&sc, "C", "C3", 1),
            Err(Error::UnsupportedMeasurementShape(_))
        ));
    }

    #[test]
    fn bancal_reference_send_setting_displaces_too() {
        let sc = build_builtin("bancal-reference").unwrap();
        let displaced = displace_measurement(&sc, "C", "C3", 1).unwrap();
        let before = behavior(&sc).unwrap();
        let after = behavior(&displaced).unwrap();
        // self-test rounds gain V†/W† prefixes but keep their statistics
        let st_before = before.round("selftest").unwrap();
        let st_after = after.round("selftest").unwrap();
        for (combo, cell) in &st_after.cells {
            assert!(cell_tv(cell, &st_before.cells[combo]) < 1e-9);
        }
        // send rounds replicate conditionally
        let send_after = after.round("send").unwrap().conditioned("C", ABORT_LABEL).unwrap();
        let send_before = before.round("send").unwrap();
        for (combo, cell) in &send_after.cells {
            assert!(cell_tv(cell, &send_before.cells[combo]) < 1e-9);
        }
    }
}
