//! Teleportation-based localization of two-qubit projective measurements.
//!
//! The protocol replicates an arbitrary projective measurement on
//! C²⊗C² using only computational basis readouts, at the price of shared
//! Φ⁺ pairs and a bounded failure probability. Alice and Bob each apply
//! one fixed unitary (V and W) to their halves of ∣φ⟩ and the ancilla
//! pairs; everything conditional is deferred into controlled gates, so
//! the prepared state is literally `V⊗W[∣φ⟩ ⊗ (∣Φ⁺⟩)^⊗n]` followed by
//! computational readout of every wire.
//!
//! Level 1 uses three pairs: Bob blind-teleports his half of ∣φ⟩ to
//! Alice, Alice applies the diagonalizer `M` of the target measurement
//! and blind-teleports both qubits back. If Bob's teleport readout was
//! (0,0) the returned qubits carry `M∣φ⟩` up to a Pauli frame known from
//! Alice's readout bits, and Bob's final readouts replicate the target.
//! Each other readout opens a dedicated "port": Bob re-teleports his two
//! qubits to Alice through pairs reserved for that failure pattern,
//! Alice applies a port-specific correction and returns them, and the
//! decode succeeds when a level's inbound readouts are all zero. A port
//! at level ℓ ≥ 2 succeeds with probability 1/16 and fans out into 15
//! deeper ports.

use crate::bell::{bell_state, bsm_unitary, pauli_frame_matrix, BellKind};
use crate::qsim::{
    apply_gate, born_distribution, project_and_drop, tensor, GateOp, OutcomeDistribution,
    PureState, Register,
};
use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use std::collections::BTreeMap;
use std::sync::Mutex;
use std::sync::OnceLock;

/// Branching-mode tree budget.
pub const MAX_BRANCHING_LEVELS: usize = 4;

/// A projective two-qubit measurement: four orthonormal eigenvectors
/// grouped into outcome classes. Eigenvector order is canonical for the
/// protocol: class by class, preserving the listed order within a class.
#[derive(Clone, Debug)]
pub struct TargetMeasurement {
    eigenvectors: Vec<Vec<C64>>,
    classes: Vec<TargetClass>,
}

#[derive(Clone, Debug)]
pub struct TargetClass {
    pub label: String,
    /// Indices into the eigenvector list.
    pub members: Vec<usize>,
}

impl TargetMeasurement {
    pub fn new(eigenvectors: Vec<Vec<C64>>, classes: Vec<TargetClass>) -> Result<Self> {
        if eigenvectors.len() != 4 || eigenvectors.iter().any(|v| v.len() != 4) {
            return Err(Error::IncompleteProjectors(format!(
                "need 4 eigenvectors of length 4, got {}",
                eigenvectors.len()
            )));
        }
        for i in 0..4 {
            for j in 0..4 {
                let dot: C64 = eigenvectors[i]
                    .iter()
                    .zip(&eigenvectors[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot.norm() - want).abs() > 1e-10 {
                    return Err(Error::IncompleteProjectors(format!(
                        "eigenvectors {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        let mut seen = [false; 4];
        for class in &classes {
            for &m in &class.members {
                if m >= 4 || seen[m] {
                    return Err(Error::IncompleteProjectors(format!(
                        "classes do not partition the eigenvectors (index {m})"
                    )));
                }
                seen[m] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::IncompleteProjectors(
                "classes do not cover all eigenvectors".into(),
            ));
        }
        Ok(TargetMeasurement { eigenvectors, classes })
    }

    /// Computational basis readout of both qubits.
    pub fn computational() -> Self {
        let mut eigenvectors = Vec::new();
        let mut classes = Vec::new();
        for k in 0..4 {
            let mut v = vec![C64::new(0.0, 0.0); 4];
            v[k] = C64::new(1.0, 0.0);
            eigenvectors.push(v);
            classes.push(TargetClass {
                label: format!("{}{}", k >> 1, k & 1),
                members: vec![k],
            });
        }
        TargetMeasurement { eigenvectors, classes }
    }

    /// The Bell state measurement, eigenvectors ordered by readout bits
    /// (z, x) of the disambiguation circuit: Φ⁺, Ψ⁺, Φ⁻, Ψ⁻.
    pub fn bsm() -> Self {
        let kinds = [
            BellKind::PhiPlus,
            BellKind::PsiPlus,
            BellKind::PhiMinus,
            BellKind::PsiMinus,
        ];
        let mut eigenvectors = Vec::new();
        let mut classes = Vec::new();
        for (k, kind) in kinds.iter().enumerate() {
            let state = bell_state(*kind, "a", "b").expect("distinct sites");
            eigenvectors.push(state.amplitudes().to_vec());
            classes.push(TargetClass { label: kind.label().to_string(), members: vec![k] });
        }
        TargetMeasurement { eigenvectors, classes }
    }

    /// Eigenvectors from the columns of a unitary; one singleton class
    /// per column labeled `e0`..`e3`.
    pub fn from_unitary(u: &DMatrix<C64>) -> Result<Self> {
        let eigenvectors: Vec<Vec<C64>> =
            (0..4).map(|k| u.column(k).iter().copied().collect()).collect();
        let classes = (0..4)
            .map(|k| TargetClass { label: format!("e{k}"), members: vec![k] })
            .collect();
        TargetMeasurement::new(eigenvectors, classes)
    }

    pub fn eigenvectors(&self) -> &[Vec<C64>] {
        &self.eigenvectors
    }

    pub fn classes(&self) -> &[TargetClass] {
        &self.classes
    }

    pub fn class_of_eigen(&self, eigen: usize) -> &TargetClass {
        self.classes
            .iter()
            .find(|c| c.members.contains(&eigen))
            .expect("classes partition the eigenvectors")
    }

    /// Direct Born-rule oracle: P(class) = Σ_{k∈class} ∣⟨e_k∣φ⟩∣².
    pub fn born(&self, phi: &PureState) -> Result<BTreeMap<String, f64>> {
        if phi.amplitudes().len() != 4 {
            return Err(Error::AmplitudeLength { got: phi.amplitudes().len(), want: 4 });
        }
        let mut out = BTreeMap::new();
        for class in &self.classes {
            let mut p = 0.0;
            for &k in &class.members {
                let dot: C64 = self.eigenvectors[k]
                    .iter()
                    .zip(phi.amplitudes())
                    .map(|(e, a)| e.conj() * a)
                    .sum();
                p += dot.norm_sqr();
            }
            out.insert(class.label.clone(), p);
        }
        Ok(out)
    }

    /// Normalized projection of `phi` onto a class subspace, or None if
    /// the class has zero probability.
    pub fn project_class(&self, phi: &PureState, class: &str) -> Option<Vec<C64>> {
        let class = self.classes.iter().find(|c| c.label == class)?;
        let mut proj = vec![C64::new(0.0, 0.0); 4];
        for &k in &class.members {
            let dot: C64 = self.eigenvectors[k]
                .iter()
                .zip(phi.amplitudes())
                .map(|(e, a)| e.conj() * a)
                .sum();
            for (p, e) in proj.iter_mut().zip(&self.eigenvectors[k]) {
                *p += dot * e;
            }
        }
        let norm: f64 = proj.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return None;
        }
        Some(proj.into_iter().map(|a| a / norm).collect())
    }
}

/// The unitary `M` mapping the k-th eigenvector to ∣k⟩: its rows are the
/// conjugated eigenvectors in canonical order.
pub fn diagonalizer(target: &TargetMeasurement) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(4, 4);
    let mut row = 0usize;
    for class in &target.classes {
        for &k in &class.members {
            for col in 0..4 {
                m[(row, col)] = target.eigenvectors[k][col].conj();
            }
            row += 1;
        }
    }
    m
}

/// Eigenvector indices in canonical (class-sorted) order: the k-th row of
/// the diagonalizer corresponds to eigenvector `canonical_order[k]`.
fn canonical_order(target: &TargetMeasurement) -> Vec<usize> {
    target
        .classes
        .iter()
        .flat_map(|c| c.members.iter().copied())
        .collect()
}

/// One ancilla Φ⁺ pair, split one half per side.
#[derive(Clone, Debug)]
pub struct AncillaPair {
    pub index: usize,
    pub alice: String,
    pub bob: String,
    pub role: PairRole,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PairRole {
    /// Carries a qubit from Bob to Alice; `port` is the failure-bit path
    /// keying the port (empty for the level-1 teleport of φ's half).
    Inbound { port: Vec<u8> },
    /// Carries a qubit from Alice back to Bob.
    Return { port: Vec<u8> },
}

/// A gate of V or W, possibly controlled on earlier readout wires of the
/// same side (deferred measurement).
#[derive(Clone, Debug)]
pub struct CircuitGate {
    pub gate: GateOp,
    pub controls: Vec<(String, u8)>,
}

impl CircuitGate {
    fn plain(gate: GateOp) -> Self {
        CircuitGate { gate, controls: vec![] }
    }

    pub fn touched_sites(&self) -> Vec<&str> {
        self.controls
            .iter()
            .map(|(s, _)| s.as_str())
            .chain(self.gate.targets().iter().map(|s| s.as_str()))
            .collect()
    }
}

/// One level of the protocol as seen by the decoder: where the inbound
/// readout bits live, which pairs return the state, and where Bob's
/// final readouts land.
#[derive(Clone, Debug)]
pub struct LevelNode {
    pub level: usize,
    /// Failure-bit path keying this node (empty at the root).
    pub key: Vec<u8>,
    /// (phase wire, flip wire) per inbound teleport: one at level 1,
    /// two at deeper levels. Success means all these bits read 0.
    pub inbound: Vec<(String, String)>,
    /// (phase wire, flip wire) per return teleport.
    pub return_readout: [(String, String); 2],
    /// Bob's outcome wires at this level.
    pub finals: [String; 2],
    /// Port correction `E†` applied by Alice (None at the root, where M
    /// is applied instead).
    pub correction: Option<DMatrix<C64>>,
    /// Failure pattern → deeper port.
    pub children: BTreeMap<Vec<u8>, LevelNode>,
}

/// The built protocol: ancilla ledger, V/W gate lists, port tree, and
/// the classical decoder's wire layout.
#[derive(Clone, Debug)]
pub struct LocalizationCircuit {
    pub levels: usize,
    pub target: TargetMeasurement,
    pub phi_alice: String,
    pub phi_bob: String,
    pub ledger: Vec<AncillaPair>,
    pub alice_gates: Vec<CircuitGate>,
    pub bob_gates: Vec<CircuitGate>,
    pub root: LevelNode,
}

impl LocalizationCircuit {
    /// All wires in register order: φ's wires then each ledger pair.
    pub fn wire_order(&self) -> Vec<String> {
        let mut wires = vec![self.phi_alice.clone(), self.phi_bob.clone()];
        for pair in &self.ledger {
            wires.push(pair.alice.clone());
            wires.push(pair.bob.clone());
        }
        wires
    }

    pub fn alice_wires(&self) -> Vec<String> {
        let mut w = vec![self.phi_alice.clone()];
        w.extend(self.ledger.iter().map(|p| p.alice.clone()));
        w
    }

    pub fn bob_wires(&self) -> Vec<String> {
        let mut w = vec![self.phi_bob.clone()];
        w.extend(self.ledger.iter().map(|p| p.bob.clone()));
        w
    }

    /// Structural custody check: no V gate touches a Bob wire and no W
    /// gate touches an Alice wire (controls included).
    pub fn custody_ok(&self) -> bool {
        let alice = self.alice_wires();
        let bob = self.bob_wires();
        self.alice_gates
            .iter()
            .all(|g| g.touched_sites().iter().all(|s| alice.iter().any(|w| w == s)))
            && self
                .bob_gates
                .iter()
                .all(|g| g.touched_sites().iter().all(|s| bob.iter().any(|w| w == s)))
    }
}

struct Builder {
    prefix: String,
    ledger: Vec<AncillaPair>,
    alice_gates: Vec<CircuitGate>,
    bob_gates: Vec<CircuitGate>,
    m: DMatrix<C64>,
}

impl Builder {
    fn fresh_pair(&mut self, role: PairRole) -> usize {
        let index = self.ledger.len();
        self.ledger.push(AncillaPair {
            index,
            alice: format!("{}p{}.a", self.prefix, index),
            bob: format!("{}p{}.b", self.prefix, index),
            role,
        });
        index
    }

    fn wire_a(&self, pair: usize) -> String {
        self.ledger[pair].alice.clone()
    }

    fn wire_b(&self, pair: usize) -> String {
        self.ledger[pair].bob.clone()
    }

    /// Build the node whose inbound qubits arrive on `sources` (Bob's
    /// wires) carrying `E·Mφ` up to Bob's fresh teleport Paulis;
    /// `own_readout` is Alice's return readout of the parent level and
    /// `controls` the accumulated failure-pattern controls.
    #[allow(clippy::too_many_arguments)]
    fn node(
        &mut self,
        level: usize,
        max_levels: usize,
        key: Vec<u8>,
        sources: [String; 2],
        parent_readout: Option<[(String, String); 2]>,
        controls: Vec<(String, u8)>,
        e_matrix: DMatrix<C64>,
    ) -> LevelNode {
        let (receive, inbound) = if level == 1 {
            // Bob teleports his half of φ to Alice through one pair.
            let t = self.fresh_pair(PairRole::Inbound { port: key.clone() });
            let u = bsm_unitary(&sources[1], &self.wire_b(t));
            self.bob_gates.push(CircuitGate::plain(u));
            let receive = [sources[0].clone(), self.wire_a(t)];
            let inbound = vec![(sources[1].clone(), self.wire_b(t))];
            (receive, inbound)
        } else {
            // Bob teleports both qubits through this port's two pairs,
            // controlled on the failure pattern that keys the port.
            let t1 = self.fresh_pair(PairRole::Inbound { port: key.clone() });
            let t2 = self.fresh_pair(PairRole::Inbound { port: key.clone() });
            for (src, t) in [(&sources[0], t1), (&sources[1], t2)] {
                let u = bsm_unitary(src, &self.wire_b(t));
                self.bob_gates.push(CircuitGate { gate: u, controls: controls.clone() });
            }
            let receive = [self.wire_a(t1), self.wire_a(t2)];
            let inbound = vec![
                (sources[0].clone(), self.wire_b(t1)),
                (sources[1].clone(), self.wire_b(t2)),
            ];
            (receive, inbound)
        };

        let correction = if level == 1 {
            // Alice applies the diagonalizer to (her half, received half).
            let m_gate = GateOp::new(self.m.clone(), vec![receive[0].clone(), receive[1].clone()])
                .expect("diagonalizer is unitary");
            self.alice_gates.push(CircuitGate::plain(m_gate));
            None
        } else {
            // Undo Alice's own previous return Paulis (self-controlled),
            // then the port correction E†.
            let parent = parent_readout.as_ref().expect("ports have a parent");
            for (q, (zw, xw)) in receive.iter().zip(parent.iter()) {
                let x = GateOp::new(crate::bell::pauli_x(), vec![q.clone()]).unwrap();
                let z = GateOp::new(crate::bell::pauli_z(), vec![q.clone()]).unwrap();
                self.alice_gates.push(CircuitGate {
                    gate: x,
                    controls: vec![(xw.clone(), 1)],
                });
                self.alice_gates.push(CircuitGate {
                    gate: z,
                    controls: vec![(zw.clone(), 1)],
                });
            }
            let e_dag = e_matrix.adjoint();
            let gate = GateOp::new(e_dag.clone(), vec![receive[0].clone(), receive[1].clone()])
                .expect("port correction is unitary");
            self.alice_gates.push(CircuitGate::plain(gate));
            Some(e_dag)
        };

        // Alice returns both qubits to Bob through two fresh pairs.
        let r1 = self.fresh_pair(PairRole::Return { port: key.clone() });
        let r2 = self.fresh_pair(PairRole::Return { port: key.clone() });
        for (src, r) in [(&receive[0], r1), (&receive[1], r2)] {
            let u = bsm_unitary(src, &self.wire_a(r));
            self.alice_gates.push(CircuitGate::plain(u));
        }
        let return_readout = [
            (receive[0].clone(), self.wire_a(r1)),
            (receive[1].clone(), self.wire_a(r2)),
        ];
        let finals = [self.wire_b(r1), self.wire_b(r2)];

        let mut children = BTreeMap::new();
        if level < max_levels {
            for pattern in failure_patterns(level) {
                let mut child_key = key.clone();
                child_key.extend(&pattern);
                let mut child_controls = controls.clone();
                for (wire_pair, bits) in inbound.iter().zip(pattern.chunks(2)) {
                    child_controls.push((wire_pair.0.clone(), bits[0]));
                    child_controls.push((wire_pair.1.clone(), bits[1]));
                }
                let corruption = corruption_matrix(&pattern, &e_matrix, level, &self.m);
                let child = self.node(
                    level + 1,
                    max_levels,
                    child_key.clone(),
                    finals.clone(),
                    Some(return_readout.clone()),
                    child_controls,
                    corruption,
                );
                children.insert(pattern, child);
            }
        }

        LevelNode {
            level,
            key,
            inbound,
            return_readout,
            finals,
            correction,
            children,
        }
    }
}

/// The nonzero inbound readout patterns at a level: 3 two-bit patterns
/// at level 1, 15 four-bit patterns deeper.
fn failure_patterns(level: usize) -> Vec<Vec<u8>> {
    let bits = if level == 1 { 2 } else { 4 };
    (1..(1u8 << bits))
        .map(|p| (0..bits).rev().map(|i| (p >> i) & 1).collect())
        .collect()
}

/// The residual corruption `E'` on Alice's reconstruction after a failed
/// level: at level 1 the received qubit carried `X^x Z^z` under M, so
/// `E' = M (I ⊗ X^x Z^z) M†`; deeper, `E' = E† X^q E` for inbound
/// pattern q.
fn corruption_matrix(
    pattern: &[u8],
    e_matrix: &DMatrix<C64>,
    level: usize,
    m: &DMatrix<C64>,
) -> DMatrix<C64> {
    if level == 1 {
        let pauli = DMatrix::<C64>::identity(2, 2)
            .kronecker(&pauli_frame_matrix(pattern[0], pattern[1]));
        m * pauli * m.adjoint()
    } else {
        let q = pauli_frame_matrix(pattern[0], pattern[1])
            .kronecker(&pauli_frame_matrix(pattern[2], pattern[3]));
        e_matrix.adjoint() * q * e_matrix
    }
}

/// Build the protocol circuit for `target` with the given level count.
pub fn build(target: &TargetMeasurement, levels: usize) -> Result<LocalizationCircuit> {
    build_with_wires(target, levels, "phi.a", "phi.b", "")
}

/// As [`build`], with caller-supplied φ wire names and an ancilla-wire
/// prefix (used when splicing the protocol into a larger scenario).
pub fn build_with_wires(
    target: &TargetMeasurement,
    levels: usize,
    phi_alice: &str,
    phi_bob: &str,
    prefix: &str,
) -> Result<LocalizationCircuit> {
    if levels < 1 {
        return Err(Error::BadLevelCount(levels));
    }
    let m = diagonalizer(target);
    let mut builder = Builder {
        prefix: prefix.to_string(),
        ledger: vec![],
        alice_gates: vec![],
        bob_gates: vec![],
        m: m.clone(),
    };
    let root = builder.node(
        1,
        levels,
        vec![],
        [phi_alice.to_string(), phi_bob.to_string()],
        None,
        vec![],
        DMatrix::<C64>::identity(4, 4),
    );
    Ok(LocalizationCircuit {
        levels,
        target: target.clone(),
        phi_alice: phi_alice.to_string(),
        phi_bob: phi_bob.to_string(),
        ledger: builder.ledger,
        alice_gates: builder.alice_gates,
        bob_gates: builder.bob_gates,
        root,
    })
}

/// Decoded result of one protocol run.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolResult {
    pub success: bool,
    /// The level whose inbound readouts were all zero.
    pub level: Option<usize>,
    /// Index of the measured eigenvector in canonical order.
    pub eigen_index: Option<usize>,
    pub class_label: Option<String>,
    /// Per returned qubit, the (phase, flip) Pauli frame of Alice's
    /// return teleports at the succeeding level.
    pub frame: Option<[(u8, u8); 2]>,
}

impl ProtocolResult {
    fn abort() -> Self {
        ProtocolResult { success: false, level: None, eigen_index: None, class_label: None, frame: None }
    }
}

/// Decode a full computational readout string (bits in
/// [`LocalizationCircuit::wire_order`] order).
pub fn decode(outcome: &[u8], circuit: &LocalizationCircuit) -> Result<ProtocolResult> {
    let wires = circuit.wire_order();
    if outcome.len() != wires.len() {
        return Err(Error::BadOutcomeString { got: outcome.len(), want: wires.len() });
    }
    let bit = |wire: &str| -> u8 {
        let pos = wires.iter().position(|w| w == wire).expect("wire in layout");
        outcome[pos]
    };
    let mut node = &circuit.root;
    loop {
        let mut pattern = Vec::new();
        for (zw, xw) in &node.inbound {
            pattern.push(bit(zw));
            pattern.push(bit(xw));
        }
        if pattern.iter().all(|&b| b == 0) {
            let flips = [bit(&node.return_readout[0].1), bit(&node.return_readout[1].1)];
            let phases = [bit(&node.return_readout[0].0), bit(&node.return_readout[1].0)];
            let bits = [bit(&node.finals[0]) ^ flips[0], bit(&node.finals[1]) ^ flips[1]];
            let canon = (bits[0] as usize) << 1 | bits[1] as usize;
            let eigen = canonical_order(&circuit.target)[canon];
            let class = circuit.target.class_of_eigen(eigen);
            return Ok(ProtocolResult {
                success: true,
                level: Some(node.level),
                eigen_index: Some(eigen),
                class_label: Some(class.label.clone()),
                frame: Some([(phases[0], flips[0]), (phases[1], flips[1])]),
            });
        }
        match node.children.get(&pattern) {
            Some(child) => node = child,
            None => return Ok(ProtocolResult::abort()),
        }
    }
}

/// Outcome key of a decoded protocol distribution.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProtocolOutcome {
    Success { level: usize, class: String },
    Abort,
}

/// Exact deferred-mode run: prepare `V⊗W[φ ⊗ Φ⁺ⁿ]` densely, read every
/// wire, and decode each outcome string.
#[derive(Clone, Debug)]
pub struct DeferredRun {
    pub joint: OutcomeDistribution,
    pub decoded: BTreeMap<ProtocolOutcome, f64>,
}

impl DeferredRun {
    pub fn success_probability(&self) -> f64 {
        self.decoded
            .iter()
            .filter(|(k, _)| matches!(k, ProtocolOutcome::Success { .. }))
            .map(|(_, &p)| p)
            .sum()
    }

    /// Class distribution conditioned on success.
    pub fn conditional(&self) -> BTreeMap<String, f64> {
        conditional_classes(&self.decoded)
    }
}

fn conditional_classes(decoded: &BTreeMap<ProtocolOutcome, f64>) -> BTreeMap<String, f64> {
    let total: f64 = decoded
        .iter()
        .filter(|(k, _)| matches!(k, ProtocolOutcome::Success { .. }))
        .map(|(_, &p)| p)
        .sum();
    let mut out = BTreeMap::new();
    if total <= 0.0 {
        return out;
    }
    for (k, &p) in decoded {
        if let ProtocolOutcome::Success { class, .. } = k {
            *out.entry(class.clone()).or_insert(0.0) += p / total;
        }
    }
    out
}

/// Fold abort mass into a uniform distribution over the outcome classes
/// (the covert-device decoder): success outcomes keep their class, abort
/// reports a uniformly random class.
pub fn fold_abort_uniform(
    decoded: &BTreeMap<ProtocolOutcome, f64>,
    target: &TargetMeasurement,
) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    let n = target.classes().len() as f64;
    for (k, &p) in decoded {
        match k {
            ProtocolOutcome::Success { class, .. } => {
                *out.entry(class.clone()).or_insert(0.0) += p;
            }
            ProtocolOutcome::Abort => {
                for class in target.classes() {
                    *out.entry(class.label.clone()).or_insert(0.0) += p / n;
                }
            }
        }
    }
    out
}

/// Prepare and measure the deferred circuit exactly. `phi` is any
/// two-qubit state; its sites are relabeled onto the circuit's φ wires.
pub fn run_deferred(circuit: &LocalizationCircuit, phi: &PureState) -> Result<DeferredRun> {
    if phi.register().dim() != 4 {
        return Err(Error::AmplitudeLength { got: phi.register().dim(), want: 4 });
    }
    let phi_reg = Register::qubits(&[&circuit.phi_alice, &circuit.phi_bob])?;
    let mut state = PureState::from_amplitudes(phi_reg, phi.amplitudes().to_vec())?;
    for pair in &circuit.ledger {
        let bell = bell_state(BellKind::PhiPlus, &pair.alice, &pair.bob)?;
        state = tensor(&state, &bell)?;
    }
    for cg in circuit.bob_gates.iter().chain(&circuit.alice_gates) {
        let gate = if cg.controls.is_empty() {
            cg.gate.clone()
        } else {
            cg.gate.controlled(&cg.controls)
        };
        state = apply_gate(&state, &gate)?;
    }
    let wires = circuit.wire_order();
    let refs: Vec<&str> = wires.iter().map(|s| s.as_str()).collect();
    let joint = born_distribution(&state, &refs)?;
    let mut decoded = BTreeMap::new();
    for (key, p) in joint.iter() {
        let bits: Vec<u8> = key.iter().map(|&d| d as u8).collect();
        let result = decode(&bits, circuit)?;
        let outcome = if result.success {
            ProtocolOutcome::Success {
                level: result.level.unwrap(),
                class: result.class_label.unwrap(),
            }
        } else {
            ProtocolOutcome::Abort
        };
        *decoded.entry(outcome).or_insert(0.0) += p;
    }
    Ok(DeferredRun { joint, decoded })
}

/// One success branch of a branching-mode run, recorded before Bob's
/// final readout.
#[derive(Clone, Debug)]
pub struct SuccessLeaf {
    pub level: usize,
    /// Probability of reaching this leaf (inbound and return readouts
    /// projected, finals not yet read).
    pub path_probability: f64,
    /// Pauli frame (phase, flip) per returned qubit.
    pub frame: [(u8, u8); 2],
    /// State of Bob's two return wires, relabeled to `out0`, `out1`.
    pub residual: PureState,
}

/// Exact branching-mode run.
#[derive(Clone, Debug)]
pub struct BranchingRun {
    pub distribution: BTreeMap<ProtocolOutcome, f64>,
    pub leaves: Vec<SuccessLeaf>,
}

impl BranchingRun {
    pub fn success_probability(&self) -> f64 {
        self.distribution
            .iter()
            .filter(|(k, _)| matches!(k, ProtocolOutcome::Success { .. }))
            .map(|(_, &p)| p)
            .sum()
    }

    pub fn conditional(&self) -> BTreeMap<String, f64> {
        conditional_classes(&self.distribution)
    }

    /// Class distribution conditioned on succeeding exactly at `level`.
    pub fn conditional_at_level(&self, level: usize) -> BTreeMap<String, f64> {
        let filtered: BTreeMap<ProtocolOutcome, f64> = self
            .distribution
            .iter()
            .filter(|(k, _)| matches!(k, ProtocolOutcome::Success { level: l, .. } if *l == level))
            .map(|(k, &p)| (k.clone(), p))
            .collect();
        conditional_classes(&filtered)
    }
}

/// Depth-first exact enumeration of the protocol with lazy port
/// allocation: only the pairs of the branch actually taken are ever
/// instantiated, so the live register stays small at any depth.
pub fn run_branching(
    target: &TargetMeasurement,
    levels: usize,
    phi: &PureState,
) -> Result<BranchingRun> {
    if levels < 1 {
        return Err(Error::BadLevelCount(levels));
    }
    if levels > MAX_BRANCHING_LEVELS {
        return Err(Error::TreeBudgetExceeded { got: levels, cap: MAX_BRANCHING_LEVELS });
    }
    if phi.register().dim() != 4 {
        return Err(Error::AmplitudeLength { got: phi.register().dim(), want: 4 });
    }
    let m = diagonalizer(target);
    let mut run = BranchingRun { distribution: BTreeMap::new(), leaves: vec![] };

    // Level 1: Bob teleports his half to Alice, Alice applies M.
    let phi_reg = Register::qubits(&["phi.a", "phi.b"])?;
    let state = PureState::from_amplitudes(phi_reg, phi.amplitudes().to_vec())?;
    let state = tensor(&state, &bell_state(BellKind::PhiPlus, "t.a", "t.b")?)?;
    let state = apply_gate(&state, &bsm_unitary("phi.b", "t.b"))?;
    for z1 in 0..2u8 {
        for x1 in 0..2u8 {
            let (p_z, s) = project_and_drop(&state, "phi.b", z1 as usize)?;
            let (p_x, s) = project_and_drop(&s, "t.b", x1 as usize)?;
            let p_in = p_z * p_x;
            let m_gate = GateOp::new(m.clone(), vec!["phi.a", "t.a"])?;
            let s = apply_gate(&s, &m_gate)?;
            if (z1, x1) == (0, 0) {
                finish_level(&mut run, target, &s, ("phi.a", "t.a"), 1, p_in)?;
            } else if levels == 1 {
                *run.distribution.entry(ProtocolOutcome::Abort).or_insert(0.0) += p_in;
            } else {
                let e = corruption_matrix(&[z1, x1], &DMatrix::identity(4, 4), 1, &m);
                descend(&mut run, target, &m, &s, ("phi.a", "t.a"), e, 2, levels, p_in)?;
            }
        }
    }
    let total: f64 = run.distribution.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadDistributionSum(total));
    }
    Ok(run)
}

/// Alice returns the two qubits on `alice_wires` to Bob; enumerate her
/// readout bits, record a success leaf per branch, and fold Bob's final
/// readouts into the decoded distribution.
fn finish_level(
    run: &mut BranchingRun,
    target: &TargetMeasurement,
    state: &PureState,
    alice_wires: (&str, &str),
    level: usize,
    path_prob: f64,
) -> Result<()> {
    let order = canonical_order(target);
    let state = tensor(state, &bell_state(BellKind::PhiPlus, "r1.a", "r1.b")?)?;
    let state = tensor(&state, &bell_state(BellKind::PhiPlus, "r2.a", "r2.b")?)?;
    let state = apply_gate(&state, &bsm_unitary(alice_wires.0, "r1.a"))?;
    let state = apply_gate(&state, &bsm_unitary(alice_wires.1, "r2.a"))?;
    for bits in 0..16u8 {
        let (z1, x1) = (bits >> 3 & 1, bits >> 2 & 1);
        let (z2, x2) = (bits >> 1 & 1, bits & 1);
        let (pa, s) = project_and_drop(&state, alice_wires.0, z1 as usize)?;
        let (pb, s) = project_and_drop(&s, "r1.a", x1 as usize)?;
        let (pc, s) = project_and_drop(&s, alice_wires.1, z2 as usize)?;
        let (pd, s) = project_and_drop(&s, "r2.a", x2 as usize)?;
        let p_ret = pa * pb * pc * pd;
        let leaf_prob = path_prob * p_ret;

        let residual = PureState::from_amplitudes(
            Register::qubits(&["out0", "out1"])?,
            s.amplitudes().to_vec(),
        )?;
        run.leaves.push(SuccessLeaf {
            level,
            path_probability: leaf_prob,
            frame: [(z1, x1), (z2, x2)],
            residual,
        });

        let finals = born_distribution(&s, &["r1.b", "r2.b"])?;
        for (key, p) in finals.iter() {
            let b1 = key[0] as u8 ^ x1;
            let b2 = key[1] as u8 ^ x2;
            let canon = (b1 as usize) << 1 | b2 as usize;
            let eigen = order[canon];
            let class = target.class_of_eigen(eigen).label.clone();
            *run.distribution
                .entry(ProtocolOutcome::Success { level, class })
                .or_insert(0.0) += leaf_prob * p;
        }
    }
    Ok(())
}

/// Process one port: Bob teleports the two qubits on `bob_wires` to
/// Alice, Alice undoes her own previous Paulis and the accumulated
/// corruption `E`, and either succeeds or descends further.
#[allow(clippy::too_many_arguments)]
fn descend(
    run: &mut BranchingRun,
    target: &TargetMeasurement,
    m: &DMatrix<C64>,
    state: &PureState,
    bob_wires: (&str, &str),
    e_matrix: DMatrix<C64>,
    level: usize,
    levels: usize,
    path_prob: f64,
) -> Result<()> {
    // Alice returns the (corrupted) reconstruction to Bob first; her
    // readout bits become the Paulis she must undo at the next port.
    let in1a = format!("in{level}.1.a");
    let in1b = format!("in{level}.1.b");
    let in2a = format!("in{level}.2.a");
    let in2b = format!("in{level}.2.b");
    let ret1a = format!("rt{level}.1.a");
    let ret1b = format!("rt{level}.1.b");
    let ret2a = format!("rt{level}.2.a");
    let ret2b = format!("rt{level}.2.b");

    let state = tensor(state, &bell_state(BellKind::PhiPlus, &ret1a, &ret1b)?)?;
    let state = tensor(&state, &bell_state(BellKind::PhiPlus, &ret2a, &ret2b)?)?;
    let state = apply_gate(&state, &bsm_unitary(bob_wires.0, &ret1a))?;
    let state = apply_gate(&state, &bsm_unitary(bob_wires.1, &ret2a))?;
    for own in 0..16u8 {
        let (z1, x1) = (own >> 3 & 1, own >> 2 & 1);
        let (z2, x2) = (own >> 1 & 1, own & 1);
        let (pa, s) = project_and_drop(&state, bob_wires.0, z1 as usize)?;
        let (pb, s) = project_and_drop(&s, &ret1a, x1 as usize)?;
        let (pc, s) = project_and_drop(&s, bob_wires.1, z2 as usize)?;
        let (pd, s) = project_and_drop(&s, &ret2a, x2 as usize)?;
        let p_ret = pa * pb * pc * pd;
        let reached = path_prob * p_ret;

        // Bob's inbound teleports through this port.
        let s = tensor(&s, &bell_state(BellKind::PhiPlus, &in1a, &in1b)?)?;
        let s = tensor(&s, &bell_state(BellKind::PhiPlus, &in2a, &in2b)?)?;
        let s = apply_gate(&s, &bsm_unitary(&ret1b, &in1b))?;
        let s = apply_gate(&s, &bsm_unitary(&ret2b, &in2b))?;
        for q in 0..16u8 {
            let (za, xa) = (q >> 3 & 1, q >> 2 & 1);
            let (zb, xb) = (q >> 1 & 1, q & 1);
            let (qa, s2) = project_and_drop(&s, &ret1b, za as usize)?;
            let (qb, s2) = project_and_drop(&s2, &in1b, xa as usize)?;
            let (qc, s2) = project_and_drop(&s2, &ret2b, zb as usize)?;
            let (qd, s2) = project_and_drop(&s2, &in2b, xb as usize)?;
            let p_in = qa * qb * qc * qd;
            let branch_prob = reached * p_in;

            // Correction: undo her own return Paulis, then E†.
            let own_paulis =
                pauli_frame_matrix(z1, x1).kronecker(&pauli_frame_matrix(z2, x2));
            let correction = e_matrix.adjoint() * own_paulis.adjoint();
            let fix = GateOp::new(correction, vec![in1a.clone(), in2a.clone()])?;
            let s2 = apply_gate(&s2, &fix)?;

            if q == 0 {
                finish_level(run, target, &s2, (&in1a, &in2a), level, branch_prob)?;
            } else if level == levels {
                *run.distribution.entry(ProtocolOutcome::Abort).or_insert(0.0) +=
                    branch_prob;
            } else {
                let pattern = [za, xa, zb, xb];
                let e_next = corruption_matrix(&pattern, &e_matrix, level, m);
                descend(run, target, m, &s2, (&in1a, &in2a), e_next, level + 1, levels, branch_prob)?;
            }
        }
    }
    Ok(())
}

/// Exact protocol success probability: 1 − (3/4)·(15/16)^{levels−1}.
///
/// The closed form is a conjecture verified against port-tree and
/// quantum enumeration (see [`success_probability_enumerated`] and the
/// tests); enumeration is the source of truth.
pub fn success_probability(levels: usize) -> Result<BigRational> {
    if levels < 1 {
        return Err(Error::BadLevelCount(levels));
    }
    static CACHE: OnceLock<Mutex<BTreeMap<usize, BigRational>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&levels) {
        return Ok(hit.clone());
    }
    let mut fail = BigRational::new(BigInt::from(3), BigInt::from(4));
    let step = BigRational::new(BigInt::from(15), BigInt::from(16));
    for _ in 1..levels {
        fail *= step.clone();
    }
    let p = BigRational::from(BigInt::from(1)) - fail;
    cache.lock().unwrap().insert(levels, p.clone());
    Ok(p)
}

/// Success probability by direct enumeration of a built circuit's port
/// tree: teleport readout bits are uniform regardless of target and
/// state, so each level-1 pattern has probability 1/4 and each deeper
/// inbound pattern 1/16.
pub fn success_probability_enumerated(circuit: &LocalizationCircuit) -> BigRational {
    fn walk(node: &LevelNode) -> BigRational {
        let patterns = BigInt::from(1) << (2 * node.inbound.len());
        let p_each = BigRational::new(BigInt::from(1), patterns);
        let mut p = p_each.clone();
        for child in node.children.values() {
            p += p_each.clone() * walk(child);
        }
        p
    }
    walk(&circuit.root)
}

/// Smallest level count whose success probability reaches 1 − ε (with a
/// 1e-9 slack on the comparison).
pub fn min_levels(epsilon: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let want = 1.0 - epsilon - 1e-9;
    for levels in 1..=10_000usize {
        let p = success_probability(levels)?;
        if p.to_f64().unwrap_or(0.0) >= want {
            return Ok(levels);
        }
    }
    Err(Error::EpsilonOutOfRange(epsilon))
}

/// A Haar-ish random target: eigenvectors from the QR factor of a
/// random complex matrix, singleton classes.
pub fn random_target(rng: &mut impl rand::Rng) -> TargetMeasurement {
    TargetMeasurement::from_unitary(&random_unitary(rng, 4)).expect("QR factor is unitary")
}

pub fn random_unitary(rng: &mut impl rand::Rng, dim: usize) -> DMatrix<C64> {
    let raw = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    raw.qr().q()
}

/// A random two-qubit pure state on the given site labels.
pub fn random_two_qubit_state(rng: &mut impl rand::Rng, a: &str, b: &str) -> PureState {
    let reg = Register::qubits(&[a, b]).expect("distinct sites");
    let mut amps: Vec<C64> = (0..4)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    PureState::from_amplitudes(reg, amps).expect("normalized")
}
