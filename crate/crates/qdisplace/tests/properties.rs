//! Property tests for the simulation core.

use proptest::prelude::*;
use qdisplace::entangle::{coarsen_state, expand_state};
use qdisplace::qsim::{
    apply_gate, born_distribution, init_state, project_and_drop, states_equal, GateOp,
    PureState, Register,
};
use qdisplace::C64;
use std::collections::BTreeMap;

fn mixed_register() -> Register {
    Register::new(vec![("a", 2), ("b", 3), ("c", 2)]).unwrap()
}

prop_compose! {
    /// A normalized random state on the (2, 3, 2) register.
    fn arb_state()(raw in prop::collection::vec(-1.0f64..1.0, 24)) -> PureState {
        let mut amps: Vec<C64> = raw
            .chunks(2)
            .map(|c| C64::new(c[0], c[1] + 0.1))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        PureState::from_amplitudes(mixed_register(), amps).unwrap()
    }
}

prop_compose! {
    /// A unitary of the given dimension from the QR factor of a random
    /// complex matrix.
    fn arb_unitary(dim: usize)(raw in prop::collection::vec(-1.0f64..1.0, 32)) -> nalgebra::DMatrix<C64> {
        let m = nalgebra::DMatrix::from_fn(dim, dim, |r, c| {
            let k = (r * dim + c) % (raw.len() / 2);
            C64::new(raw[2 * k], raw[2 * k + 1] + 0.37 + r as f64 * 0.01)
        });
        m.qr().q()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm_and_invert(state in arb_state(), u in arb_unitary(6), on_ab in any::<bool>()) {
        let targets: Vec<&str> = if on_ab { vec!["a", "b"] } else { vec!["b", "c"] };
        let gate = GateOp::new(u, targets).unwrap();
        let rotated = apply_gate(&state, &gate).unwrap();
        prop_assert!((rotated.norm_sqr() - 1.0).abs() < 1e-10);
        let back = apply_gate(&rotated, &gate.dagger()).unwrap();
        prop_assert!(states_equal(&state, &back, 1e-10).unwrap());
    }

    #[test]
    fn marginals_match_projection_sums(state in arb_state()) {
        // born on (a, c) equals summing project_and_drop branches over b.
        let marginal = born_distribution(&state, &["a", "c"]).unwrap();
        let mut sums: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for outcome in 0..3 {
            if let Ok((p, rest)) = project_and_drop(&state, "b", outcome) {
                for (key, q) in born_distribution(&rest, &["a", "c"]).unwrap().iter() {
                    *sums.entry(key.clone()).or_insert(0.0) += p * q;
                }
            }
        }
        for (key, p) in marginal.iter() {
            let s = sums.get(key).copied().unwrap_or(0.0);
            prop_assert!((p - s).abs() < 1e-9);
        }
    }

    #[test]
    fn basis_states_read_back(index in 0usize..12) {
        let reg = mixed_register();
        let state = init_state(&reg, index).unwrap();
        let dist = born_distribution(&state, &["a", "b", "c"]).unwrap();
        prop_assert!((dist.probability(&reg.digits(index)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_phase_is_invisible(state in arb_state(), angle in 0.0f64..std::f64::consts::TAU) {
        let phase = C64::from_polar(1.0, angle);
        let rotated = PureState::from_amplitudes(
            state.register().clone(),
            state.amplitudes().iter().map(|&a| a * phase).collect(),
        )
        .unwrap();
        prop_assert!(states_equal(&state, &rotated, 1e-10).unwrap());
        let d1 = born_distribution(&state, &["a", "b"]).unwrap();
        let d2 = born_distribution(&rotated, &["a", "b"]).unwrap();
        prop_assert!(d1.tv_distance(&d2) < 1e-12);
    }

    #[test]
    fn coarsen_expand_is_identity(state in arb_state()) {
        let merged = coarsen_state(&state, &["a", "b"], "q").unwrap();
        prop_assert_eq!(merged.register().site_dim("q").unwrap(), 6);
        let back = expand_state(&merged, "q", &[("a", 2), ("b", 3)]).unwrap();
        prop_assert_eq!(back.register(), state.register());
        for (x, y) in back.amplitudes().iter().zip(state.amplitudes()) {
            prop_assert_eq!(x, y);
        }
        // coarsening never changes readout statistics
        let before = born_distribution(&state, &["c"]).unwrap();
        let after = born_distribution(&merged, &["c"]).unwrap();
        prop_assert!(before.tv_distance(&after) < 1e-12);
    }
}
