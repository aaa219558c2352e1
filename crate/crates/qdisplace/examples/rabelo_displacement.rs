//! The tripartite scheme and its displaced counter-model.
//!
//! In the original scheme Charlie's third setting is a Bell state
//! measurement — an entangled measurement across his two qubits. The
//! displaced model prepares Λ = (I ⊗ U ⊗ I)(Φ⁺ ⊗ Φ⁺) instead and makes
//! C3 a plain two-qubit computational readout, while C1 and C2 first
//! apply U† to restore the Bell pairs. Both models produce byte-for-byte
//! the same behavior, so no statistics can tell them apart: the
//! entanglement has merely moved from the measurement into the state
//! (and into C1/C2, whose operators become entangled). Merging Charlie's
//! qubits into one ququart removes even that residue.
//!
//! Run with: cargo run --example rabelo_displacement

use qdisplace::entangle::{entropy, measurement_verdict, Bipartition};
use qdisplace::qsim::states_equal;
use qdisplace::scenario::{
    behavior, build_builtin, compare_behaviors, lambda_amplitudes, lambda_state,
};
use qdisplace::qsim::{PureState, Register};

fn main() {
    // Λ and its amplitude list agree.
    let lambda = lambda_state().unwrap();
    let listed = PureState::from_amplitudes(
        Register::qubits(&["A", "CA", "CB", "B"]).unwrap(),
        lambda_amplitudes(),
    )
    .unwrap();
    assert!(states_equal(&lambda, &listed, 1e-10).unwrap());
    println!("Λ matches its eight-amplitude list (overlap 1 within 1e-10).");
    let cut = Bipartition::new(vec!["A", "CA"], vec!["CB", "B"]).unwrap();
    println!("entropy of Λ across A,C_A ∣ C_B,B: {:.6} bits", entropy(&lambda, &cut).unwrap());

    // Behaviors of the three models are identical.
    let original = build_builtin("rabelo-original").unwrap();
    let displaced = build_builtin("rabelo-displaced").unwrap();
    let ququart = build_builtin("rabelo-ququart").unwrap();
    let t_orig = behavior(&original).unwrap();
    for other in [&displaced, &ququart] {
        let t = behavior(other).unwrap();
        let cmp = compare_behaviors(&t_orig, &t, 1e-9).unwrap();
        println!(
            "{} vs {}: max TV over {} cells = {:.3e} → {}",
            original.name,
            other.name,
            cmp.cells_compared,
            cmp.max_tv,
            if cmp.equivalent { "equivalent" } else { "inequivalent" }
        );
        assert!(cmp.equivalent);
    }

    // The separability verdicts flip between the models.
    let middle = Bipartition::new(vec!["CA"], vec!["CB"]).unwrap();
    println!("\nseparability of Charlie's settings across C_A ∣ C_B:");
    for (model, label) in [(&original, "original"), (&displaced, "displaced")] {
        let slot = &model.rounds[0].slots[1];
        for instr in &slot.settings {
            let verdict = measurement_verdict(instr, &model.register, &middle).unwrap();
            println!(
                "  {label:>9} {}: {}",
                instr.label,
                if verdict.entangled() { "entangled" } else { "product" }
            );
        }
    }
    let verdict = |model: &qdisplace::scenario::Scenario, idx: usize| {
        measurement_verdict(&model.rounds[0].slots[1].settings[idx], &model.register, &middle)
            .unwrap()
            .entangled()
    };
    assert!(verdict(&original, 2), "original C3 is entangled");
    assert!(!verdict(&original, 0) && !verdict(&original, 1));
    assert!(!verdict(&displaced, 2), "displaced C3 is product");
    // C1 becomes entangled; C2's wing direction is σx, the transparent
    // eigenbasis of the CNOT target, so its conjugated projectors stay
    // product. The displaced model retains entanglement in the pair.
    assert!(verdict(&displaced, 0));
    assert!(!verdict(&displaced, 1));

    println!("\nThe entanglement moved from C3 into the state (and into C1),");
    println!("with the observable behavior unchanged.");
}
