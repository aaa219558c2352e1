//! Schmidt decomposition, entanglement entropy, separability verdicts
//! for measurements, and qudit coarsening.
//!
//! Separability is always judged *relative to a bipartition* of the
//! register sites. A measurement is "entangled" across a cut when at
//! least one of its operators does not admit a separable form there;
//! for rank-1 operators this is exactly Schmidt rank > 1 of the
//! projector vector.

use crate::qsim::{GateOp, PureState, Register};
use crate::scenario::Instrument;
use crate::{C64, Error, Result};
use nalgebra::DMatrix;

/// Schmidt coefficients below this are treated as zero for rank counts.
pub const SCHMIDT_CUTOFF: f64 = 1e-9;

/// Two disjoint, nonempty site sets covering a chosen subregister.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl Bipartition {
    pub fn new(left: Vec<impl Into<String>>, right: Vec<impl Into<String>>) -> Result<Self> {
        let left: Vec<String> = left.into_iter().map(Into::into).collect();
        let right: Vec<String> = right.into_iter().map(Into::into).collect();
        if left.is_empty() || right.is_empty() {
            return Err(Error::BadBipartition("both sides must be nonempty".into()));
        }
        if left.iter().any(|l| right.contains(l)) {
            return Err(Error::BadBipartition("sides are not disjoint".into()));
        }
        Ok(Bipartition { left, right })
    }

    pub fn contains(&self, site: &str) -> bool {
        self.side_of(site).is_some()
    }

    pub fn side_of(&self, site: &str) -> Option<Side> {
        if self.left.iter().any(|l| l == site) {
            Some(Side::Left)
        } else if self.right.iter().any(|r| r == site) {
            Some(Side::Right)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A Schmidt decomposition across a bipartition: descending nonnegative
/// coefficients paired with orthonormal bases on each side.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub left_vectors: Vec<Vec<C64>>,
    pub right_vectors: Vec<Vec<C64>>,
}

impl SchmidtDecomposition {
    /// Number of coefficients above [`SCHMIDT_CUTOFF`].
    pub fn rank(&self) -> usize {
        self.coefficients.iter().filter(|&&c| c > SCHMIDT_CUTOFF).count()
    }
}

/// Reshape a state across the bipartition into a left×right matrix.
fn amplitude_matrix(state: &PureState, cut: &Bipartition) -> Result<DMatrix<C64>> {
    let reg = state.register();
    for label in reg.labels() {
        if !cut.contains(label) {
            return Err(Error::BadBipartition(format!(
                "register site `{label}` is on neither side"
            )));
        }
    }
    for label in cut.left.iter().chain(&cut.right) {
        reg.position(label)?;
    }
    let ldims: Vec<usize> = cut
        .left
        .iter()
        .map(|l| reg.site_dim(l))
        .collect::<Result<_>>()?;
    let rdims: Vec<usize> = cut
        .right
        .iter()
        .map(|l| reg.site_dim(l))
        .collect::<Result<_>>()?;
    let lpos: Vec<usize> = cut
        .left
        .iter()
        .map(|l| reg.position(l))
        .collect::<Result<_>>()?;
    let rpos: Vec<usize> = cut
        .right
        .iter()
        .map(|l| reg.position(l))
        .collect::<Result<_>>()?;
    let ldim: usize = ldims.iter().product();
    let rdim: usize = rdims.iter().product();
    let mut m = DMatrix::<C64>::zeros(ldim, rdim);
    for (idx, &amp) in state.amplitudes().iter().enumerate() {
        let digits = reg.digits(idx);
        let mut li = 0usize;
        for (k, &p) in lpos.iter().enumerate() {
            li = li * ldims[k] + digits[p];
        }
        let mut ri = 0usize;
        for (k, &p) in rpos.iter().enumerate() {
            ri = ri * rdims[k] + digits[p];
        }
        m[(li, ri)] = amp;
    }
    Ok(m)
}

/// Schmidt decomposition of a state across a bipartition that covers its
/// register. Coefficients are nonnegative and descending; their squares
/// sum to the squared norm.
pub fn schmidt(state: &PureState, cut: &Bipartition) -> Result<SchmidtDecomposition> {
    let m = amplitude_matrix(state, cut)?;
    schmidt_of_matrix(&m)
}

fn schmidt_of_matrix(m: &DMatrix<C64>) -> Result<SchmidtDecomposition> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("SVD with u requested");
    let vt = svd.v_t.as_ref().expect("SVD with v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let mut coefficients = Vec::with_capacity(order.len());
    let mut left_vectors = Vec::with_capacity(order.len());
    let mut right_vectors = Vec::with_capacity(order.len());
    for &k in &order {
        coefficients.push(svd.singular_values[k]);
        left_vectors.push(u.column(k).iter().copied().collect());
        // M = U Σ Vᴴ, so the k-th Schmidt right vector is the k-th row
        // of Vᴴ and ψ = Σ c·(left ⊗ right).
        right_vectors.push(vt.row(k).iter().copied().collect());
    }
    Ok(SchmidtDecomposition { coefficients, left_vectors, right_vectors })
}

/// Entanglement entropy across the cut, in bits: the Shannon entropy of
/// the squared Schmidt coefficients.
pub fn entropy(state: &PureState, cut: &Bipartition) -> Result<f64> {
    let dec = schmidt(state, cut)?;
    Ok(dec
        .coefficients
        .iter()
        .map(|c| {
            let p = c * c;
            if p > 0.0 {
                -p * p.log2()
            } else {
                0.0
            }
        })
        .sum())
}

/// Per-outcome separability verdicts for an instrument across a cut.
#[derive(Clone, Debug)]
pub struct SeparabilityVerdict {
    pub outcomes: Vec<OutcomeVerdict>,
}

#[derive(Clone, Debug)]
pub struct OutcomeVerdict {
    pub label: String,
    pub product: bool,
    pub schmidt_coefficients: Vec<f64>,
}

impl SeparabilityVerdict {
    /// The instrument verdict: entangled iff any outcome is entangled.
    pub fn entangled(&self) -> bool {
        self.outcomes.iter().any(|o| !o.product)
    }
}

/// Decide, per outcome class, whether the instrument's measurement
/// operators are product or entangled across the cut.
///
/// Two routes apply:
/// - if every pre-rotation gate is supported entirely on one side of the
///   cut, the instrument is structurally separable there: every effect
///   factors as (left operator) ⊗ (right operator) regardless of class
///   rank, and all outcomes report product;
/// - otherwise the rotation genuinely spans the cut, and each class must
///   be rank-1 (a single raw outcome, so the effect is a projector onto
///   one vector); the verdict is the Schmidt rank of that vector. Higher
///   rank classes are unsupported — refine them first if the grouping is
///   purely classical (see [`Instrument::refined`]).
pub fn measurement_verdict(
    instrument: &Instrument,
    register: &Register,
    cut: &Bipartition,
) -> Result<SeparabilityVerdict> {
    for site in instrument.support() {
        if !cut.contains(&site) {
            return Err(Error::BadBipartition(format!(
                "instrument site `{site}` is on neither side of the cut"
            )));
        }
    }

    let structurally_separable = instrument.rotation.iter().all(|g| {
        let sides: Vec<_> = g.targets().iter().map(|t| cut.side_of(t)).collect();
        sides.iter().all(|s| *s == Some(Side::Left)) || sides.iter().all(|s| *s == Some(Side::Right))
    });
    if structurally_separable {
        let outcomes = instrument
            .classes
            .iter()
            .map(|c| OutcomeVerdict {
                label: c.label.clone(),
                product: true,
                schmidt_coefficients: vec![1.0],
            })
            .collect();
        return Ok(SeparabilityVerdict { outcomes });
    }

    // Spanning rotation: need one projector vector per class.
    let sub = instrument.measured_register(register)?;
    if instrument.rotation.iter().any(|g| {
        g.targets()
            .iter()
            .any(|t| !instrument.sites.contains(t))
    }) {
        return Err(Error::BadInstrument(
            "rotation spans the cut but acts outside the measured sites".into(),
        ));
    }
    let measured_cut = Bipartition::new(
        cut.left
            .iter()
            .filter(|l| instrument.sites.contains(l))
            .cloned()
            .collect::<Vec<_>>(),
        cut.right
            .iter()
            .filter(|l| instrument.sites.contains(l))
            .cloned()
            .collect::<Vec<_>>(),
    )?;

    let mut outcomes = Vec::with_capacity(instrument.classes.len());
    for class in &instrument.classes {
        if class.outcomes.len() != 1 {
            return Err(Error::UnsupportedClassRank {
                label: class.label.clone(),
                rank: class.outcomes.len(),
            });
        }
        let vector = instrument.effect_vector(&sub, class.outcomes[0])?;
        let dec = schmidt(&vector, &measured_cut)?;
        outcomes.push(OutcomeVerdict {
            label: class.label.clone(),
            product: dec.rank() <= 1,
            schmidt_coefficients: dec.coefficients,
        });
    }
    Ok(SeparabilityVerdict { outcomes })
}

/// Merge a contiguous group of register sites into one qudit site whose
/// dimension is the product of the group's dimensions. Amplitudes are
/// unchanged: the relabeling ∣i j ...⟩ → ∣k⟩ reads the group digits
/// most-significant-first.
pub fn coarsen_state(state: &PureState, group: &[&str], new_label: &str) -> Result<PureState> {
    let reg = state.register();
    let positions: Vec<usize> = group
        .iter()
        .map(|l| reg.position(l))
        .collect::<Result<_>>()?;
    check_contiguous(&positions, group)?;
    let start = positions[0];
    let group_dim: usize = group
        .iter()
        .map(|l| reg.site_dim(l))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .product();
    let mut sites: Vec<(String, usize)> = Vec::new();
    for (i, s) in reg.sites().iter().enumerate() {
        if i == start {
            sites.push((new_label.to_string(), group_dim));
        } else if !positions.contains(&i) {
            sites.push((s.label.clone(), s.dim));
        }
    }
    let new_reg = Register::new(sites)?;
    PureState::from_amplitudes(new_reg, state.amplitudes().to_vec())
}

/// Inverse of [`coarsen_state`]: split a qudit site back into the listed
/// (label, dim) factors. Identity on amplitudes.
pub fn expand_state(
    state: &PureState,
    site: &str,
    factors: &[(&str, usize)],
) -> Result<PureState> {
    let reg = state.register();
    let pos = reg.position(site)?;
    let prod: usize = factors.iter().map(|&(_, d)| d).product();
    if prod != reg.site_dim(site)? {
        return Err(Error::BadDimension(prod));
    }
    let mut sites: Vec<(String, usize)> = Vec::new();
    for (i, s) in reg.sites().iter().enumerate() {
        if i == pos {
            for &(label, dim) in factors {
                sites.push((label.to_string(), dim));
            }
        } else {
            sites.push((s.label.clone(), s.dim));
        }
    }
    let new_reg = Register::new(sites)?;
    PureState::from_amplitudes(new_reg, state.amplitudes().to_vec())
}

/// Retarget a gate supported entirely on the merged group to the single
/// coarse site. The matrix is unchanged; the gate's target order must be
/// the group's register order for the digit convention to line up.
pub fn coarsen_gate(gate: &GateOp, group: &[&str], new_label: &str) -> Result<GateOp> {
    if gate.targets().len() != group.len()
        || gate.targets().iter().zip(group).any(|(t, g)| t != g)
    {
        return Err(Error::BadInstrument(format!(
            "gate targets {:?} do not match the merged group {:?}",
            gate.targets(),
            group
        )));
    }
    Ok(gate.on(vec![new_label]))
}

fn check_contiguous(positions: &[usize], group: &[&str]) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::NonContiguousGroup(vec![]));
    }
    for w in positions.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::NonContiguousGroup(
                group.iter().map(|s| s.to_string()).collect(),
            ));
        }
    }
    Ok(())
}

/// Reconstruction check used by tests: rebuild the state from a Schmidt
/// decomposition and return the max amplitude deviation.
pub fn reconstruction_error(
    state: &PureState,
    cut: &Bipartition,
    dec: &SchmidtDecomposition,
) -> Result<f64> {
    let m = amplitude_matrix(state, cut)?;
    let mut rebuilt = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    for (k, &c) in dec.coefficients.iter().enumerate() {
        for (i, &l) in dec.left_vectors[k].iter().enumerate() {
            for (j, &r) in dec.right_vectors[k].iter().enumerate() {
                rebuilt[(i, j)] += C64::new(c, 0.0) * l * r;
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            err = err.max((m[(i, j)] - rebuilt[(i, j)]).norm());
        }
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{bell_state, bsm_unitary, BellKind};
    use crate::qsim::{apply_gate, init_state, states_equal, tensor};
    use crate::scenario::{lambda_state, xi_state, OutcomeClass};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn cut(left: &[&str], right: &[&str]) -> Bipartition {
        Bipartition::new(left.to_vec(), right.to_vec()).unwrap()
    }

    #[test]
    fn schmidt_of_bell_and_product_states() {
        let phi = bell_state(BellKind::PhiPlus, "a", "b").unwrap();
        let dec = schmidt(&phi, &cut(&["a"], &["b"])).unwrap();
        assert_eq!(dec.rank(), 2);
        assert_abs_diff_eq!(dec.coefficients[0], FRAC_1_SQRT_2, epsilon = 1e-10);
        assert_abs_diff_eq!(dec.coefficients[1], FRAC_1_SQRT_2, epsilon = 1e-10);
        assert!(reconstruction_error(&phi, &cut(&["a"], &["b"]), &dec).unwrap() < 1e-9);

        let reg = Register::qubits(&["a", "b"]).unwrap();
        let s01 = init_state(&reg, 1).unwrap();
        let dec = schmidt(&s01, &cut(&["a"], &["b"])).unwrap();
        assert_eq!(dec.rank(), 1);
        assert_abs_diff_eq!(dec.coefficients[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn lambda_is_entangled_across_the_middle_cut() {
        let lambda = lambda_state().unwrap();
        let dec = schmidt(&lambda, &cut(&["A", "CA"], &["CB", "B"])).unwrap();
        assert!(dec.rank() > 1);
    }

    #[test]
    fn lambda_entangled_across_every_ca_cb_separating_cut() {
        let lambda = lambda_state().unwrap();
        // every bipartition of {A, CA, CB, B} with CA left and CB right
        let others = ["A", "B"];
        for mask in 0..4u8 {
            let mut left = vec!["CA"];
            let mut right = vec!["CB"];
            for (i, o) in others.iter().enumerate() {
                if mask >> i & 1 == 0 {
                    left.push(o);
                } else {
                    right.push(o);
                }
            }
            let dec = schmidt(&lambda, &cut(&left, &right)).unwrap();
            assert!(dec.rank() > 1, "Λ should be entangled across {left:?}|{right:?}");
        }
    }

    #[test]
    fn undoing_the_preparation_restores_the_bell_pairs() {
        let lambda = lambda_state().unwrap();
        let restored = apply_gate(&lambda, &bsm_unitary("CA", "CB").dagger()).unwrap();
        let pairs = tensor(
            &bell_state(BellKind::PhiPlus, "A", "CA").unwrap(),
            &bell_state(BellKind::PhiPlus, "CB", "B").unwrap(),
        )
        .unwrap();
        let pairs = crate::qsim::permute(&pairs, &["A", "CA", "CB", "B"]).unwrap();
        assert!(states_equal(&restored, &pairs, 1e-10).unwrap());
    }

    #[test]
    fn entropy_of_reference_states() {
        let phi = bell_state(BellKind::PhiPlus, "a", "b").unwrap();
        assert_abs_diff_eq!(entropy(&phi, &cut(&["a"], &["b"])).unwrap(), 1.0, epsilon = 1e-10);

        let reg = Register::qubits(&["a", "b"]).unwrap();
        let prod = init_state(&reg, 2).unwrap();
        assert_abs_diff_eq!(entropy(&prod, &cut(&["a"], &["b"])).unwrap(), 0.0, epsilon = 1e-12);

        // Ξ across the cut separating the two wings: only one Bell pair
        // crosses, and local unitaries do not change the entropy.
        let xi = xi_state().unwrap();
        let e = entropy(&xi, &cut(&["A", "CA1", "CA2"], &["CB2", "CB1", "B"])).unwrap();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn computational_readout_is_product_across_any_cut() {
        let instr = Instrument::computational(&["a", "b"], 4);
        let reg = Register::qubits(&["a", "b"]).unwrap();
        let verdict = measurement_verdict(&instr, &reg, &cut(&["a"], &["b"])).unwrap();
        assert!(!verdict.entangled());
        assert_eq!(verdict.outcomes.len(), 4);
        for o in &verdict.outcomes {
            assert!(o.product);
        }
    }

    #[test]
    fn bsm_is_entangled_across_the_pair() {
        let mut instr = Instrument::computational(&["a", "b"], 4);
        instr.rotation = vec![bsm_unitary("a", "b")];
        let reg = Register::qubits(&["a", "b"]).unwrap();
        let verdict = measurement_verdict(&instr, &reg, &cut(&["a"], &["b"])).unwrap();
        assert!(verdict.entangled());
        for o in &verdict.outcomes {
            assert!(!o.product);
            assert_abs_diff_eq!(o.schmidt_coefficients[0], FRAC_1_SQRT_2, epsilon = 1e-9);
            assert_abs_diff_eq!(o.schmidt_coefficients[1], FRAC_1_SQRT_2, epsilon = 1e-9);
        }
    }

    #[test]
    fn grouped_classes_error_when_rotation_spans_the_cut() {
        let mut instr = Instrument::computational(&["a", "b"], 4);
        instr.rotation = vec![bsm_unitary("a", "b")];
        instr.classes = vec![
            OutcomeClass { label: "even".into(), outcomes: vec![0, 3] },
            OutcomeClass { label: "odd".into(), outcomes: vec![1, 2] },
        ];
        let reg = Register::qubits(&["a", "b"]).unwrap();
        assert!(matches!(
            measurement_verdict(&instr, &reg, &cut(&["a"], &["b"])),
            Err(Error::UnsupportedClassRank { .. })
        ));
    }

    #[test]
    fn coarsening_relabels_without_touching_amplitudes() {
        let reg = Register::qubits(&["a", "b"]).unwrap();
        // ∣10⟩ → ∣2⟩ and ∣01⟩ → ∣1⟩
        let s10 = init_state(&reg, 2).unwrap();
        let q = coarsen_state(&s10, &["a", "b"], "q").unwrap();
        assert_eq!(q.register().site_dim("q").unwrap(), 4);
        assert_abs_diff_eq!(q.amplitudes()[2].re, 1.0, epsilon = 1e-12);

        let s01 = init_state(&reg, 1).unwrap();
        let q = coarsen_state(&s01, &["a", "b"], "q").unwrap();
        assert_abs_diff_eq!(q.amplitudes()[1].re, 1.0, epsilon = 1e-12);

        // round trip
        let back = expand_state(&q, "q", &[("a", 2), ("b", 2)]).unwrap();
        assert_eq!(back.register(), s01.register());
        for (x, y) in back.amplitudes().iter().zip(s01.amplitudes()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn coarsening_requires_contiguity() {
        let reg = Register::qubits(&["a", "b", "c"]).unwrap();
        let s = init_state(&reg, 0).unwrap();
        assert!(matches!(
            coarsen_state(&s, &["a", "c"], "q"),
            Err(Error::NonContiguousGroup(_))
        ));
    }

    #[test]
    fn merged_site_gate_is_single_site_and_verdict_product() {
        // U† on a merged ququart is a single-site gate; computational
        // readout of the ququart is product across any cut that does not
        // split the merged site.
        let u_dag = bsm_unitary("a", "b").dagger();
        let g = coarsen_gate(&u_dag, &["a", "b"], "q").unwrap();
        assert_eq!(g.targets(), &["q".to_string()]);

        let mut instr = Instrument::computational(&["q"], 4);
        instr.rotation = vec![g];
        let reg = Register::new(vec![("q", 4), ("other", 2)]).unwrap();
        let verdict =
            measurement_verdict(&instr, &reg, &cut(&["q"], &["other"])).unwrap();
        assert!(!verdict.entangled());
    }

    fn random_state(rng: &mut ChaCha8Rng, reg: &Register) -> PureState {
        let mut amps: Vec<C64> = (0..reg.dim())
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        PureState::from_amplitudes(reg.clone(), amps).unwrap()
    }

    fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<C64> {
        let raw = DMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let qr = raw.qr();
        qr.q()
    }

    #[test]
    fn local_gates_preserve_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let reg = Register::qubits(&["a", "b", "c", "d"]).unwrap();
        let chop = cut(&["a", "b"], &["c", "d"]);
        for _ in 0..25 {
            let s = random_state(&mut rng, &reg);
            let before = entropy(&s, &chop).unwrap();
            let left_gate =
                GateOp::new(random_unitary(&mut rng, 4), vec!["a", "b"]).unwrap();
            let right_gate =
                GateOp::new(random_unitary(&mut rng, 4), vec!["c", "d"]).unwrap();
            let s2 = apply_gate(&apply_gate(&s, &left_gate).unwrap(), &right_gate).unwrap();
            let after = entropy(&s2, &chop).unwrap();
            assert!((before - after).abs() < 1e-9);
        }
    }

    #[test]
    fn local_conjugation_never_entangles_a_product_instrument() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let reg = Register::qubits(&["a", "b"]).unwrap();
        let chop = cut(&["a"], &["b"]);
        for _ in 0..10 {
            let mut instr = Instrument::computational(&["a", "b"], 4);
            instr.rotation = vec![
                GateOp::new(random_unitary(&mut rng, 2), vec!["a"]).unwrap(),
                GateOp::new(random_unitary(&mut rng, 2), vec!["b"]).unwrap(),
            ];
            let verdict = measurement_verdict(&instr, &reg, &chop).unwrap();
            assert!(!verdict.entangled());
        }
    }
}
