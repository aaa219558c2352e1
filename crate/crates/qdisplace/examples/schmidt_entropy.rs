//! Schmidt decompositions, entanglement entropy, and ququart coarsening.
//!
//! Run with: cargo run --example schmidt_entropy

use qdisplace::bell::{bell_state, bsm_unitary, BellKind};
use qdisplace::entangle::{
    coarsen_gate, coarsen_state, entropy, expand_state, measurement_verdict, schmidt,
    Bipartition,
};
use qdisplace::qsim::{init_state, Register};
use qdisplace::scenario::{lambda_state, Instrument};

fn main() {
    let cut = |l: &[&str], r: &[&str]| Bipartition::new(l.to_vec(), r.to_vec()).unwrap();

    let phi = bell_state(BellKind::PhiPlus, "a", "b").unwrap();
    let dec = schmidt(&phi, &cut(&["a"], &["b"])).unwrap();
    println!(
        "Φ⁺ across a ∣ b: coefficients {:?}, rank {}, entropy {:.3} bits",
        dec.coefficients
            .iter()
            .map(|c| (c * 1e6).round() / 1e6)
            .collect::<Vec<_>>(),
        dec.rank(),
        entropy(&phi, &cut(&["a"], &["b"])).unwrap()
    );
    assert_eq!(dec.rank(), 2);

    let product = init_state(&Register::qubits(&["a", "b"]).unwrap(), 1).unwrap();
    let dec = schmidt(&product, &cut(&["a"], &["b"])).unwrap();
    println!("∣01⟩ across a ∣ b: rank {}, entropy {:.3} bits", dec.rank(),
        entropy(&product, &cut(&["a"], &["b"])).unwrap());
    assert_eq!(dec.rank(), 1);

    // Λ is entangled across every cut separating the middle sites.
    let lambda = lambda_state().unwrap();
    for (l, r) in [
        (vec!["A", "CA"], vec!["CB", "B"]),
        (vec!["CA"], vec!["A", "CB", "B"]),
        (vec!["A", "B", "CA"], vec!["CB"]),
    ] {
        let c = Bipartition::new(l.clone(), r.clone()).unwrap();
        let rank = schmidt(&lambda, &c).unwrap().rank();
        println!("Λ across {l:?} ∣ {r:?}: Schmidt rank {rank}");
        assert!(rank > 1);
    }

    // Coarsening two qubits into a ququart is a pure relabeling: ∣10⟩
    // becomes ∣2⟩ and the round trip is the identity.
    let reg = Register::qubits(&["a", "b"]).unwrap();
    let s10 = init_state(&reg, 2).unwrap();
    let ququart = coarsen_state(&s10, &["a", "b"], "q").unwrap();
    println!(
        "\n∣10⟩ coarsened: site `q` of dimension {}, amplitude 1 at index 2",
        ququart.register().site_dim("q").unwrap()
    );
    let back = expand_state(&ququart, "q", &[("a", 2), ("b", 2)]).unwrap();
    assert_eq!(back.amplitudes(), s10.amplitudes());

    // A BSM's entangling unitary becomes a single-site ququart gate, and
    // computational readout of the merged site is product across any cut
    // that respects it.
    let merged = coarsen_gate(&bsm_unitary("a", "b").dagger(), &["a", "b"], "q").unwrap();
    let mut instr = Instrument::computational(&["q"], 4);
    instr.rotation = vec![merged];
    let reg = Register::new(vec![("q", 4), ("w", 2)]).unwrap();
    let verdict = measurement_verdict(&instr, &reg, &cut(&["q"], &["w"])).unwrap();
    println!(
        "merged-site instrument across q ∣ w: {}",
        if verdict.entangled() { "entangled" } else { "product" }
    );
    assert!(!verdict.entangled());

    println!("\nEntanglement is a property of a cut; remove the cut and it is gone.");
}
