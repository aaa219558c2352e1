//! Built-in scenario families.
//!
//! The Rabelo family is a tripartite scheme: Alice and Bob each toggle
//! between two binary measurements while Charlie either runs two
//! parallel CHSH tests with them (settings C1, C2) or performs a Bell
//! state measurement that swaps a Bell state to Alice and Bob (C3).
//! `rabelo-displaced` replicates its behavior with the entanglement
//! moved from C3 into the prepared state Λ, and `rabelo-ququart`
//! relabels Charlie's qubit pair as a single four-level system.
//!
//! The Bancal family splits Charlie into spacelike-separated wings C_A
//! and C_B in self-test rounds and rejoins them in send rounds.
//! `bancal-classical` replaces the transported qubits with local BSMs
//! and classical outcome composition; `bancal-unentangled` additionally
//! absorbs those BSMs into the six-qubit state Ξ so that only product
//! measurements remain; `bancal-ququart` merges each wing's qubit pair
//! into a ququart.

use super::{swap_lookup, Instrument, OutcomeClass, PartySlot, RoundSpec, Scenario, StateCtor};
use crate::bell::{
    bsm_matrix, bsm_unitary, canonical_chsh_settings, BellKind, Direction, Wing,
};
use crate::qsim::{GateOp, Register};
use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use std::collections::BTreeMap;

pub const BUILTIN_NAMES: [&str; 7] = [
    "rabelo-original",
    "rabelo-displaced",
    "rabelo-ququart",
    "bancal-reference",
    "bancal-classical",
    "bancal-unentangled",
    "bancal-ququart",
];

pub fn build_builtin(name: &str) -> Result<Scenario> {
    match name {
        "rabelo-original" => rabelo_original(),
        "rabelo-displaced" => rabelo_displaced(),
        "rabelo-ququart" => rabelo_ququart(),
        "bancal-reference" => bancal_reference(),
        "bancal-classical" => bancal_classical(),
        "bancal-unentangled" => bancal_unentangled(),
        "bancal-ququart" => bancal_ququart(),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

fn rotation_gate(dir: Direction, site: &str) -> GateOp {
    GateOp::new(dir.measurement_rotation(), vec![site]).expect("rotations are unitary")
}

/// Binary measurement of one site along `dir`; outcome +1 ↦ "0".
fn direction_instrument(label: &str, site: &str, dir: Direction) -> Instrument {
    Instrument::new(
        label,
        vec![rotation_gate(dir, site)],
        vec![site],
        vec![
            OutcomeClass { label: "0".into(), outcomes: vec![0] },
            OutcomeClass { label: "1".into(), outcomes: vec![1] },
        ],
    )
}

fn two_bit_classes() -> Vec<OutcomeClass> {
    (0..4)
        .map(|k| OutcomeClass {
            label: format!("{}{}", k >> 1, k & 1),
            outcomes: vec![k],
        })
        .collect()
}

/// Independent direction measurements of two sites, outcomes labeled by
/// the two bits.
fn product_pair_instrument(
    label: &str,
    site_a: &str,
    dir_a: Direction,
    site_b: &str,
    dir_b: Direction,
) -> Instrument {
    Instrument::new(
        label,
        vec![rotation_gate(dir_a, site_a), rotation_gate(dir_b, site_b)],
        vec![site_a, site_b],
        two_bit_classes(),
    )
}

fn bell_classes() -> Vec<OutcomeClass> {
    (0..4)
        .map(|k| OutcomeClass {
            label: BellKind::from_bits((k >> 1) as u8, (k & 1) as u8)
                .label()
                .to_string(),
            outcomes: vec![k],
        })
        .collect()
}

/// The disambiguated BSM: U then two computational readouts, outcomes
/// labeled by the Bell kind they project onto.
fn bsm_instrument(label: &str, site_a: &str, site_b: &str) -> Instrument {
    Instrument::new(
        label,
        vec![bsm_unitary(site_a, site_b)],
        vec![site_a, site_b],
        bell_classes(),
    )
}

/// Classes mapping four readout bits (two BSM outcomes) to the composed
/// Bell state of the swap table.
fn swap_classes() -> Vec<OutcomeClass> {
    let mut grouped: Vec<(String, Vec<usize>)> = Vec::new();
    for raw in 0..16usize {
        let p = BellKind::from_bits((raw >> 3 & 1) as u8, (raw >> 2 & 1) as u8);
        let q = BellKind::from_bits((raw >> 1 & 1) as u8, (raw & 1) as u8);
        let label = swap_lookup(p, q).label().to_string();
        match grouped.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push(raw),
            None => grouped.push((label, vec![raw])),
        }
    }
    grouped
        .into_iter()
        .map(|(label, outcomes)| OutcomeClass { label, outcomes })
        .collect()
}

fn wing_dirs(wing: Wing) -> [Direction; 2] {
    let s = canonical_chsh_settings(wing);
    [s.first, s.second]
}

fn binary_slot(party: &str, site: &str, wing: Wing) -> PartySlot {
    let dirs = wing_dirs(wing);
    PartySlot {
        party: party.into(),
        custody: vec![site.into()],
        settings: vec![
            direction_instrument(&format!("{party}1"), site, dirs[0]),
            direction_instrument(&format!("{party}2"), site, dirs[1]),
        ],
    }
}

fn rabelo_charlie_settings(with_restore: bool) -> Vec<Instrument> {
    let ca = wing_dirs(Wing::CA);
    let cb = wing_dirs(Wing::CB);
    let mut c1 = product_pair_instrument("C1", "CA", ca[0], "CB", cb[0]);
    let mut c2 = product_pair_instrument("C2", "CA", ca[1], "CB", cb[1]);
    let c3 = if with_restore {
        for instr in [&mut c1, &mut c2] {
            instr.rotation.insert(0, bsm_unitary("CA", "CB").dagger());
        }
        Instrument::new("C3", vec![], vec!["CA", "CB"], bell_classes())
    } else {
        bsm_instrument("C3", "CA", "CB")
    };
    vec![c1, c2, c3]
}

fn rabelo_scenario(name: &str, displaced: bool) -> Result<Scenario> {
    let register = Register::qubits(&["A", "CA", "CB", "B"])?;
    let mut initial = vec![
        StateCtor::Bell { a: "A".into(), b: "CA".into() },
        StateCtor::Bell { a: "CB".into(), b: "B".into() },
    ];
    if displaced {
        initial.push(StateCtor::Gate(bsm_unitary("CA", "CB")));
    }
    Ok(Scenario {
        name: name.into(),
        register,
        initial,
        rounds: vec![RoundSpec {
            name: "main".into(),
            slots: vec![
                binary_slot("A", "A", Wing::A),
                PartySlot {
                    party: "C".into(),
                    custody: vec!["CA".into(), "CB".into()],
                    settings: rabelo_charlie_settings(displaced),
                },
                binary_slot("B", "B", Wing::B),
            ],
        }],
        alignment: BTreeMap::new(),
    })
}

fn rabelo_original() -> Result<Scenario> {
    rabelo_scenario("rabelo-original", false)
}

fn rabelo_displaced() -> Result<Scenario> {
    rabelo_scenario("rabelo-displaced", true)
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

fn identity2() -> DMatrix<C64> {
    DMatrix::<C64>::identity(2, 2)
}

fn rabelo_ququart() -> Result<Scenario> {
    let register = Register::new(vec![("A", 2), ("C", 4), ("B", 2)])?;
    let ca = wing_dirs(Wing::CA);
    let cb = wing_dirs(Wing::CB);
    let u_dag = bsm_matrix().adjoint();
    let charlie = |label: &str, da: Direction, db: Direction| -> Instrument {
        let m = kron(&da.measurement_rotation(), &db.measurement_rotation()) * &u_dag;
        Instrument::new(
            label,
            vec![GateOp::new(m, vec!["C"]).expect("unitary")],
            vec!["C"],
            two_bit_classes(),
        )
    };
    Ok(Scenario {
        name: "rabelo-ququart".into(),
        register,
        initial: vec![StateCtor::Amplitudes(super::lambda_amplitudes())],
        rounds: vec![RoundSpec {
            name: "main".into(),
            slots: vec![
                binary_slot("A", "A", Wing::A),
                PartySlot {
                    party: "C".into(),
                    custody: vec!["C".into()],
                    settings: vec![
                        charlie("C1", ca[0], cb[0]),
                        charlie("C2", ca[1], cb[1]),
                        Instrument::new("C3", vec![], vec!["C"], bell_classes()),
                    ],
                },
                binary_slot("B", "B", Wing::B),
            ],
        }],
        alignment: BTreeMap::new(),
    })
}

fn bancal_reference() -> Result<Scenario> {
    let register = Register::qubits(&["A", "CA", "CB", "B"])?;
    Ok(Scenario {
        name: "bancal-reference".into(),
        register,
        initial: vec![
            StateCtor::Bell { a: "A".into(), b: "CA".into() },
            StateCtor::Bell { a: "CB".into(), b: "B".into() },
        ],
        rounds: vec![
            RoundSpec {
                name: "selftest".into(),
                slots: vec![
                    binary_slot("A", "A", Wing::A),
                    binary_slot("C_A", "CA", Wing::CA),
                    binary_slot("C_B", "CB", Wing::CB),
                    binary_slot("B", "B", Wing::B),
                ],
            },
            RoundSpec {
                name: "send".into(),
                slots: vec![
                    binary_slot("A", "A", Wing::A),
                    PartySlot {
                        party: "C".into(),
                        custody: vec!["CA".into(), "CB".into()],
                        settings: vec![bsm_instrument("C3", "CA", "CB")],
                    },
                    binary_slot("B", "B", Wing::B),
                ],
            },
        ],
        alignment: BTreeMap::new(),
    })
}

const BANCAL_SITES: [&str; 6] = ["A", "CA1", "CA2", "CB2", "CB1", "B"];

fn bancal_pairs() -> Vec<StateCtor> {
    vec![
        StateCtor::Bell { a: "A".into(), b: "CA1".into() },
        StateCtor::Bell { a: "CA2".into(), b: "CB2".into() },
        StateCtor::Bell { a: "CB1".into(), b: "B".into() },
    ]
}

/// Self-test slot of a Bancal wing measuring `measured` while holding
/// `custody`; `restore` is prepended to each setting's rotation.
fn bancal_wing_slot(
    party: &str,
    custody: [&str; 2],
    measured: &str,
    wing: Wing,
    restore: Option<GateOp>,
) -> PartySlot {
    let dirs = wing_dirs(wing);
    let settings = (0..2)
        .map(|k| {
            let mut instr =
                direction_instrument(&format!("{party}{}", k + 1), measured, dirs[k]);
            if let Some(g) = &restore {
                instr.rotation.insert(0, g.clone());
            }
            instr
        })
        .collect();
    PartySlot {
        party: party.into(),
        custody: custody.iter().map(|s| s.to_string()).collect(),
        settings,
    }
}

fn bancal_six_qubit(name: &str, unentangled: bool) -> Result<Scenario> {
    let register = Register::qubits(&BANCAL_SITES)?;
    let mut initial = bancal_pairs();
    if unentangled {
        initial.push(StateCtor::Gate(bsm_unitary("CA1", "CA2")));
        initial.push(StateCtor::Gate(bsm_unitary("CB2", "CB1")));
    }
    let restore_a = unentangled.then(|| bsm_unitary("CA1", "CA2").dagger());
    let restore_b = unentangled.then(|| bsm_unitary("CB2", "CB1").dagger());
    let send_c = if unentangled {
        Instrument::new(
            "C3",
            vec![],
            vec!["CA1", "CA2", "CB2", "CB1"],
            swap_classes(),
        )
    } else {
        Instrument::new(
            "C3",
            vec![bsm_unitary("CA1", "CA2"), bsm_unitary("CB2", "CB1")],
            vec!["CA1", "CA2", "CB2", "CB1"],
            swap_classes(),
        )
    };
    Ok(Scenario {
        name: name.into(),
        register,
        initial,
        rounds: vec![
            RoundSpec {
                name: "selftest".into(),
                slots: vec![
                    binary_slot("A", "A", Wing::A),
                    bancal_wing_slot("C_A", ["CA1", "CA2"], "CA1", Wing::CA, restore_a),
                    bancal_wing_slot("C_B", ["CB2", "CB1"], "CB1", Wing::CB, restore_b),
                    binary_slot("B", "B", Wing::B),
                ],
            },
            RoundSpec {
                name: "send".into(),
                slots: vec![
                    binary_slot("A", "A", Wing::A),
                    PartySlot {
                        party: "C".into(),
                        custody: vec!["CA1".into(), "CA2".into(), "CB2".into(), "CB1".into()],
                        settings: vec![send_c],
                    },
                    binary_slot("B", "B", Wing::B),
                ],
            },
        ],
        alignment: BTreeMap::new(),
    })
}

fn bancal_classical() -> Result<Scenario> {
    bancal_six_qubit("bancal-classical", false)
}

fn bancal_unentangled() -> Result<Scenario> {
    bancal_six_qubit("bancal-unentangled", true)
}

fn bancal_ququart() -> Result<Scenario> {
    let register = Register::new(vec![("A", 2), ("CA", 4), ("CB", 4), ("B", 2)])?;
    let xi = super::xi_state()?;
    let u_dag = bsm_matrix().adjoint();
    let ca_dirs = wing_dirs(Wing::CA);
    let cb_dirs = wing_dirs(Wing::CB);

    // C_A's merged site is (CA1, CA2): it measures the first qubit.
    let wing_a = |k: usize| -> Instrument {
        let m = kron(&ca_dirs[k].measurement_rotation(), &identity2()) * &u_dag;
        Instrument::new(
            format!("C_A{}", k + 1),
            vec![GateOp::new(m, vec!["CA"]).expect("unitary")],
            vec!["CA"],
            vec![
                OutcomeClass { label: "0".into(), outcomes: vec![0, 1] },
                OutcomeClass { label: "1".into(), outcomes: vec![2, 3] },
            ],
        )
    };
    // C_B's merged site is (CB2, CB1): it measures the second qubit.
    let wing_b = |k: usize| -> Instrument {
        let m = kron(&identity2(), &cb_dirs[k].measurement_rotation()) * &u_dag;
        Instrument::new(
            format!("C_B{}", k + 1),
            vec![GateOp::new(m, vec!["CB"]).expect("unitary")],
            vec!["CB"],
            vec![
                OutcomeClass { label: "0".into(), outcomes: vec![0, 2] },
                OutcomeClass { label: "1".into(), outcomes: vec![1, 3] },
            ],
        )
    };

    Ok(Scenario {
        name: "bancal-ququart".into(),
        register,
        initial: vec![StateCtor::Amplitudes(xi.amplitudes().to_vec())],
        rounds: vec![
            RoundSpec {
                name: "selftest".into(),
                slots: vec![
                    binary_slot("A", "A", Wing::A),
                    PartySlot {
                        party: "C_A".into(),
                        custody: vec!["CA".into()],
                        settings: vec![wing_a(0), wing_a(1)],
                    },
                    PartySlot {
                        party: "C_B".into(),
                        custody: vec!["CB".into()],
                        settings: vec![wing_b(0), wing_b(1)],
                    },
                    binary_slot("B", "B", Wing::B),
                ],
            },
            RoundSpec {
                name: "send".into(),
                slots: vec![
                    binary_slot("A", "A", Wing::A),
                    PartySlot {
                        party: "C".into(),
                        custody: vec!["CA".into(), "CB".into()],
                        settings: vec![Instrument::new(
                            "C3",
                            vec![],
                            vec!["CA", "CB"],
                            swap_classes(),
                        )],
                    },
                    binary_slot("B", "B", Wing::B),
                ],
            },
        ],
        alignment: BTreeMap::new(),
    })
}

/// A minimal scenario with two entangled measurements at two parties on
/// disjoint qubit pairs, used to exercise iterated displacement: C holds
/// (c1, c2) and performs a BSM, D holds (d1, d2) and measures a rotated
/// entangled basis, and the pairs (c1, d1), (c2, d2) are entangled.
pub fn toy_two_entangled() -> Result<Scenario> {
    let register = Register::qubits(&["c1", "c2", "d1", "d2"])?;
    let rot = kron(
        &Direction::from_angle(0.9).measurement_rotation(),
        &identity2(),
    ) * bsm_matrix()
        * kron(&identity2(), &Direction::from_angle(0.4).measurement_rotation());
    let md = Instrument::new(
        "MD",
        vec![GateOp::new(rot, vec!["d1", "d2"])?],
        vec!["d1", "d2"],
        (0..4)
            .map(|k| OutcomeClass { label: format!("m{k}"), outcomes: vec![k] })
            .collect(),
    );
    Ok(Scenario {
        name: "toy-two-entangled".into(),
        register,
        initial: vec![
            StateCtor::Bell { a: "c1".into(), b: "d1".into() },
            StateCtor::Bell { a: "c2".into(), b: "d2".into() },
        ],
        rounds: vec![RoundSpec {
            name: "main".into(),
            slots: vec![
                PartySlot {
                    party: "C".into(),
                    custody: vec!["c1".into(), "c2".into()],
                    settings: vec![bsm_instrument("MC", "c1", "c2")],
                },
                PartySlot {
                    party: "D".into(),
                    custody: vec!["d1".into(), "d2".into()],
                    settings: vec![md],
                },
            ],
        }],
        alignment: BTreeMap::new(),
    })
}
