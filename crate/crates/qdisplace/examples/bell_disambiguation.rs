//! Disambiguating the Bell state measurement.
//!
//! A BSM projects two qubits onto the Bell basis. It can be rewritten as
//! a fixed unitary U = (H ⊗ I)·CNOT followed by two *independent*
//! computational basis readouts: U maps each Bell state to a distinct
//! basis state, so the readout bits (z, x) name the projector. This is
//! the seed of every displacement argument in this crate — absorbing U
//! into the prepared state turns an entangled measurement into a product
//! one.
//!
//! Run with: cargo run --example bell_disambiguation

use qdisplace::bell::{
    bell_state, bsm_outcome_map, bsm_unitary, uncorrected_teleport_fragment, BELL_KINDS,
};
use qdisplace::qsim::{apply_gate, born_distribution, project_and_drop, states_equal, tensor,
    PureState, Register};
use qdisplace::C64;

fn main() {
    println!("U = (H ⊗ I)·CNOT maps the Bell basis to the computational basis:\n");
    for kind in BELL_KINDS {
        let state = bell_state(kind, "c1", "c2").unwrap();
        let rotated = apply_gate(&state, &bsm_unitary("c1", "c2")).unwrap();
        let dist = born_distribution(&rotated, &["c1", "c2"]).unwrap();
        let (bits, _) = dist.iter().find(|(_, p)| *p > 0.5).unwrap();
        let (z, x) = (bits[0] as u8, bits[1] as u8);
        println!("  U ∣{kind}⟩ = ∣{z}{x}⟩   readout ({z},{x}) → {}", bsm_outcome_map((z, x)));
        assert_eq!(bsm_outcome_map((z, x)), kind);
    }

    println!("\nUncorrected teleportation: readout (z, x) leaves X^x Z^z ψ with the receiver.");
    let alpha = C64::new(0.6, 0.0);
    let beta = C64::new(0.0, 0.8);
    let source = PureState::from_amplitudes(
        Register::qubits(&["s"]).unwrap(),
        vec![alpha, beta],
    )
    .unwrap();
    let fragment = uncorrected_teleport_fragment("s", "m", "r").unwrap();
    let pair = bell_state(qdisplace::bell::BellKind::PhiPlus, "m", "r").unwrap();
    let mut joint = tensor(&source, &pair).unwrap();
    for gate in &fragment.gates {
        joint = apply_gate(&joint, gate).unwrap();
    }
    for z in 0..2u8 {
        for x in 0..2u8 {
            let (p1, s) = project_and_drop(&joint, &fragment.readout[0], z as usize).unwrap();
            let (p2, s) = project_and_drop(&s, &fragment.readout[1], x as usize).unwrap();
            // expected: X^x Z^z (α∣0⟩ + β∣1⟩)
            let (mut a, mut b) = (alpha, beta);
            if z == 1 {
                b = -b;
            }
            if x == 1 {
                std::mem::swap(&mut a, &mut b);
            }
            let expect = PureState::from_amplitudes(
                Register::qubits(&["r"]).unwrap(),
                vec![a, b],
            )
            .unwrap();
            assert!(states_equal(&s, &expect, 1e-10).unwrap());
            println!("  readout ({z},{x})  p = {:.4}  receiver holds X^{x} Z^{z} ψ", p1 * p2);
            assert!((p1 * p2 - 0.25).abs() < 1e-10, "teleport bits are uniform");
        }
    }
    println!("\nAll Bell disambiguation checks passed.");
}
