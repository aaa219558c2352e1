//! Measurement scenarios and their observable behaviors.
//!
//! A [`Scenario`] fixes a register, a preparation recipe for the shared
//! state, the round types, and for each round type the parties with
//! their site custody and measurement settings. Its [`behavior`] is the
//! exact conditional distribution of outcome labels given the round type
//! and every party's setting choice — the only device-independent
//! observable. Two scenarios are operationally indistinguishable exactly
//! when their behaviors agree, which [`compare_behaviors`] decides by
//! total-variation distance.
//!
//! Built-in scenario families live in [`builtins`]; the generic rewrite
//! that displaces a two-qubit measurement into the prepared state lives
//! in [`displace`].

mod builtins;
mod displace;
mod json;

pub use builtins::{build_builtin, toy_two_entangled, BUILTIN_NAMES};
pub use displace::displace_measurement;
pub use json::{fmt_prob, BehaviorDoc, ScenarioDoc};

use crate::bell::{bell_state, bsm_unitary, BellKind};
use crate::qsim::{
    apply_gate, born_distribution, init_state, tensor, GateOp, PureState, Register,
};
use crate::{C64, Error, Result};
use std::collections::{BTreeMap, BTreeSet};

/// A labeled measurement setting: an optional pre-rotation gate list, the
/// measured sites, and a partition of the raw computational outcomes
/// into labeled outcome classes.
#[derive(Clone, Debug)]
pub struct Instrument {
    pub label: String,
    pub rotation: Vec<GateOp>,
    pub sites: Vec<String>,
    pub classes: Vec<OutcomeClass>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeClass {
    pub label: String,
    /// Raw outcome indices over the measured sites, most significant
    /// site first.
    pub outcomes: Vec<usize>,
}

impl Instrument {
    pub fn new(
        label: impl Into<String>,
        rotation: Vec<GateOp>,
        sites: Vec<impl Into<String>>,
        classes: Vec<OutcomeClass>,
    ) -> Self {
        Instrument {
            label: label.into(),
            rotation,
            sites: sites.into_iter().map(Into::into).collect(),
            classes,
        }
    }

    /// Plain computational readout with one class per raw outcome,
    /// labeled by its decimal index.
    pub fn computational(sites: &[&str], outcome_count: usize) -> Instrument {
        Instrument {
            label: "computational".into(),
            rotation: vec![],
            sites: sites.iter().map(|s| s.to_string()).collect(),
            classes: (0..outcome_count)
                .map(|k| OutcomeClass { label: k.to_string(), outcomes: vec![k] })
                .collect(),
        }
    }

    /// All sites the instrument touches: rotation targets and readouts.
    pub fn support(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = self.sites.iter().cloned().collect();
        for g in &self.rotation {
            s.extend(g.targets().iter().cloned());
        }
        s
    }

    /// The measured sites as a register, dimensions from `full`.
    pub fn measured_register(&self, full: &Register) -> Result<Register> {
        let sites: Vec<(String, usize)> = self
            .sites
            .iter()
            .map(|s| Ok((s.clone(), full.site_dim(s)?)))
            .collect::<Result<_>>()?;
        Register::new(sites)
    }

    /// Raw outcome count over the measured sites.
    pub fn outcome_count(&self, full: &Register) -> Result<usize> {
        Ok(self.measured_register(full)?.dim())
    }

    /// The rank-1 effect vector of raw outcome `raw`: the pre-rotation's
    /// adjoint applied to ∣raw⟩. Requires the rotation to act within the
    /// measured sites.
    pub fn effect_vector(&self, measured: &Register, raw: usize) -> Result<PureState> {
        let mut v = init_state(measured, raw)?;
        for g in self.rotation.iter().rev() {
            v = apply_gate(&v, &g.dagger())?;
        }
        Ok(v)
    }

    pub fn class_label_of(&self, raw: usize) -> Result<&str> {
        self.classes
            .iter()
            .find(|c| c.outcomes.contains(&raw))
            .map(|c| c.label.as_str())
            .ok_or_else(|| {
                Error::BadInstrument(format!(
                    "raw outcome {raw} of `{}` belongs to no class",
                    self.label
                ))
            })
    }

    /// The same instrument with classes refined to one raw outcome each
    /// (classical coarse-graining undone); refined classes are labeled
    /// by their raw index.
    pub fn refined(&self, full: &Register) -> Result<Instrument> {
        let n = self.outcome_count(full)?;
        Ok(Instrument {
            label: format!("{}~refined", self.label),
            rotation: self.rotation.clone(),
            sites: self.sites.clone(),
            classes: (0..n)
                .map(|k| OutcomeClass { label: k.to_string(), outcomes: vec![k] })
                .collect(),
        })
    }

    fn validate(&self, full: &Register) -> Result<()> {
        let n = self.outcome_count(full)?;
        let mut seen = vec![false; n];
        for class in &self.classes {
            for &raw in &class.outcomes {
                if raw >= n || seen[raw] {
                    return Err(Error::BadInstrument(format!(
                        "`{}`: classes do not partition the {n} raw outcomes",
                        self.label
                    )));
                }
                seen[raw] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::BadInstrument(format!(
                "`{}`: classes do not cover the {n} raw outcomes",
                self.label
            )));
        }
        Ok(())
    }
}

/// One step of a state-preparation recipe.
#[derive(Clone, Debug)]
pub enum StateCtor {
    /// Prepare Φ⁺ on two qubit sites currently in ∣0⟩ (a Hadamard on `a`
    /// followed by CNOT onto `b`).
    Bell { a: String, b: String },
    /// Apply a unitary.
    Gate(GateOp),
    /// Replace the full amplitude vector.
    Amplitudes(Vec<C64>),
}

/// A party's role within one round type.
#[derive(Clone, Debug)]
pub struct PartySlot {
    pub party: String,
    pub custody: Vec<String>,
    pub settings: Vec<Instrument>,
}

/// One round type: the parties that act and their setting menus, in
/// outcome-tuple order.
#[derive(Clone, Debug)]
pub struct RoundSpec {
    pub name: String,
    pub slots: Vec<PartySlot>,
}

/// A complete measurement scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub register: Register,
    pub initial: Vec<StateCtor>,
    pub rounds: Vec<RoundSpec>,
    /// Outcome label maps (party → from → to) applied to the behavior,
    /// aligning labels with a reference model. Empty for builtins, whose
    /// labels are aligned by construction.
    pub alignment: BTreeMap<String, BTreeMap<String, String>>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.rounds.is_empty() {
            return Err(Error::BadScenario("no round types".into()));
        }
        for round in &self.rounds {
            let mut held: BTreeSet<&str> = BTreeSet::new();
            for slot in &round.slots {
                for site in &slot.custody {
                    self.register.position(site)?;
                    if !held.insert(site) {
                        return Err(Error::BadScenario(format!(
                            "round `{}`: site `{site}` is in two custodies",
                            round.name
                        )));
                    }
                }
                if slot.settings.is_empty() {
                    return Err(Error::BadScenario(format!(
                        "round `{}`: party `{}` has no settings",
                        round.name, slot.party
                    )));
                }
                for instr in &slot.settings {
                    instr.validate(&self.register)?;
                    for site in instr.support() {
                        if !slot.custody.contains(&site) {
                            return Err(Error::BadScenario(format!(
                                "round `{}`: instrument `{}` of `{}` touches `{site}` outside its custody",
                                round.name, instr.label, slot.party
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Build the prepared state from the recipe.
    pub fn build_initial(&self) -> Result<PureState> {
        let mut state = init_state(&self.register, 0)?;
        for ctor in &self.initial {
            state = match ctor {
                StateCtor::Bell { a, b } => {
                    let h = GateOp::new(crate::bell::hadamard_matrix(), vec![a.clone()])?;
                    let cx = GateOp::new(crate::bell::cnot_matrix(), vec![a.clone(), b.clone()])?;
                    apply_gate(&apply_gate(&state, &h)?, &cx)?
                }
                StateCtor::Gate(g) => apply_gate(&state, g)?,
                StateCtor::Amplitudes(v) => {
                    PureState::from_amplitudes(self.register.clone(), v.clone())?
                }
            };
        }
        Ok(state)
    }

    /// Find an instrument by party and label across all rounds.
    pub fn find_instrument(&self, party: &str, label: &str) -> Option<(usize, usize, usize)> {
        for (ri, round) in self.rounds.iter().enumerate() {
            for (si, slot) in round.slots.iter().enumerate() {
                if slot.party != party {
                    continue;
                }
                if let Some(ii) = slot.settings.iter().position(|i| i.label == label) {
                    return Some((ri, si, ii));
                }
            }
        }
        None
    }
}

/// A distribution over outcome-label tuples.
pub type Cell = BTreeMap<Vec<String>, f64>;

/// Total-variation distance between two cells.
pub fn cell_tv(a: &Cell, b: &Cell) -> f64 {
    let mut keys: Vec<&Vec<String>> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (a.get(*k).copied().unwrap_or(0.0) - b.get(*k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Exact behavior of one round type: cells indexed by setting choices.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundBehavior {
    pub round: String,
    pub parties: Vec<String>,
    pub setting_counts: Vec<usize>,
    pub cells: BTreeMap<Vec<usize>, Cell>,
}

impl RoundBehavior {
    pub fn party_index(&self, party: &str) -> Option<usize> {
        self.parties.iter().position(|p| p == party)
    }

    /// Condition every cell on `party` not reporting `drop_label`,
    /// renormalizing. Cells are left untouched when the label never
    /// occurs.
    pub fn conditioned(&self, party: &str, drop_label: &str) -> Result<RoundBehavior> {
        let pi = self
            .party_index(party)
            .ok_or_else(|| Error::StructureMismatch(format!("no party `{party}`")))?;
        let mut out = self.clone();
        for cell in out.cells.values_mut() {
            let kept: Cell = cell
                .iter()
                .filter(|(k, _)| k[pi] != drop_label)
                .map(|(k, &v)| (k.clone(), v))
                .collect();
            let mass: f64 = kept.values().sum();
            if mass <= 0.0 {
                return Err(Error::BadDistributionSum(mass));
            }
            *cell = kept.into_iter().map(|(k, v)| (k, v / mass)).collect();
        }
        Ok(out)
    }

    /// Probability that `party` reports `label`, per cell.
    pub fn label_mass(&self, party: &str, label: &str) -> Result<BTreeMap<Vec<usize>, f64>> {
        let pi = self
            .party_index(party)
            .ok_or_else(|| Error::StructureMismatch(format!("no party `{party}`")))?;
        Ok(self
            .cells
            .iter()
            .map(|(combo, cell)| {
                let mass = cell
                    .iter()
                    .filter(|(k, _)| k[pi] == label)
                    .map(|(_, &v)| v)
                    .sum();
                (combo.clone(), mass)
            })
            .collect())
    }
}

/// The complete behavior table of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorTable {
    pub scenario: String,
    pub rounds: Vec<RoundBehavior>,
}

impl BehaviorTable {
    pub fn round(&self, name: &str) -> Option<&RoundBehavior> {
        self.rounds.iter().find(|r| r.round == name)
    }

    /// Rename `party`'s outcome labels through `map` (labels absent from
    /// the map pass through).
    pub fn relabel(&self, party: &str, map: &BTreeMap<String, String>) -> BehaviorTable {
        let mut out = self.clone();
        for round in &mut out.rounds {
            let Some(pi) = round.party_index(party) else { continue };
            for cell in round.cells.values_mut() {
                let mut next: Cell = BTreeMap::new();
                for (key, &v) in cell.iter() {
                    let mut key = key.clone();
                    if let Some(to) = map.get(&key[pi]) {
                        key[pi] = to.clone();
                    }
                    *next.entry(key).or_insert(0.0) += v;
                }
                *cell = next;
            }
        }
        out
    }
}

fn setting_combos(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut combos = vec![vec![]];
    for &n in counts {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..n).map(move |k| {
                    let mut c = c.clone();
                    c.push(k);
                    c
                })
            })
            .collect();
    }
    combos
}

/// Exact Born-rule behavior of a scenario: for every round type and
/// setting combination, apply the chosen pre-rotations, read all
/// measured sites, and map raw outcomes through the outcome classes.
pub fn behavior(sc: &Scenario) -> Result<BehaviorTable> {
    sc.validate()?;
    let initial = sc.build_initial()?;
    let mut rounds = Vec::new();
    for round in &sc.rounds {
        let counts: Vec<usize> = round.slots.iter().map(|s| s.settings.len()).collect();
        let mut cells = BTreeMap::new();
        for combo in setting_combos(&counts) {
            let mut state = initial.clone();
            let mut all_sites: Vec<&str> = Vec::new();
            for (slot, &choice) in round.slots.iter().zip(&combo) {
                let instr = &slot.settings[choice];
                for g in &instr.rotation {
                    state = apply_gate(&state, g)?;
                }
                all_sites.extend(instr.sites.iter().map(|s| s.as_str()));
            }
            let dist = born_distribution(&state, &all_sites)?;
            let mut cell: Cell = BTreeMap::new();
            for (digits, p) in dist.iter() {
                let mut labels = Vec::with_capacity(round.slots.len());
                let mut offset = 0usize;
                for (slot, &choice) in round.slots.iter().zip(&combo) {
                    let instr = &slot.settings[choice];
                    let mut raw = 0usize;
                    for site in &instr.sites {
                        raw = raw * sc.register.site_dim(site)? + digits[offset];
                        offset += 1;
                    }
                    labels.push(instr.class_label_of(raw)?.to_string());
                }
                *cell.entry(labels).or_insert(0.0) += p;
            }
            cells.insert(combo, cell);
        }
        rounds.push(RoundBehavior {
            round: round.name.clone(),
            parties: round.slots.iter().map(|s| s.party.clone()).collect(),
            setting_counts: counts,
            cells,
        });
    }
    let mut table = BehaviorTable { scenario: sc.name.clone(), rounds };
    for (party, map) in &sc.alignment {
        table = table.relabel(party, map);
    }
    Ok(table)
}

/// Result of comparing two behavior tables.
#[derive(Clone, Debug)]
pub struct BehaviorComparison {
    pub max_tv: f64,
    pub equivalent: bool,
    pub cells_compared: usize,
}

/// Compare two behavior tables cell by cell. Structures (round names,
/// party lists, setting counts) must match; outcome labels are compared
/// as-is, so align them first if the models differ.
pub fn compare_behaviors(a: &BehaviorTable, b: &BehaviorTable, tol: f64) -> Result<BehaviorComparison> {
    if a.rounds.len() != b.rounds.len() {
        return Err(Error::StructureMismatch(format!(
            "{} vs {} round types",
            a.rounds.len(),
            b.rounds.len()
        )));
    }
    let mut max_tv: f64 = 0.0;
    let mut cells = 0usize;
    for (ra, rb) in a.rounds.iter().zip(&b.rounds) {
        if ra.round != rb.round {
            return Err(Error::StructureMismatch(format!(
                "round `{}` vs `{}`",
                ra.round, rb.round
            )));
        }
        if ra.parties != rb.parties {
            return Err(Error::StructureMismatch(format!(
                "round `{}`: parties {:?} vs {:?}",
                ra.round, ra.parties, rb.parties
            )));
        }
        if ra.setting_counts != rb.setting_counts {
            return Err(Error::StructureMismatch(format!(
                "round `{}`: setting counts {:?} vs {:?}",
                ra.round, ra.setting_counts, rb.setting_counts
            )));
        }
        for (combo, cell_a) in &ra.cells {
            let cell_b = rb.cells.get(combo).ok_or_else(|| {
                Error::StructureMismatch(format!("round `{}`: missing cell {combo:?}", ra.round))
            })?;
            max_tv = max_tv.max(cell_tv(cell_a, cell_b));
            cells += 1;
        }
    }
    Ok(BehaviorComparison { max_tv, equivalent: max_tv <= tol, cells_compared: cells })
}

/// The Bell state shared by the outer parties after a double BSM on the
/// middle pairs: bitwise XOR of the two outcomes' (phase, flip) bits.
pub fn swap_lookup(p: BellKind, q: BellKind) -> BellKind {
    let (z1, x1) = p.bits();
    let (z2, x2) = q.bits();
    BellKind::from_bits(z1 ^ z2, x1 ^ x2)
}

/// ±1 value of a bit label ("0" → +1, "1" → −1), reading the character
/// at `index` (for multi-bit labels such as "01").
pub fn bit_sign_at(label: &str, index: usize) -> f64 {
    match label.as_bytes().get(index) {
        Some(b'0') => 1.0,
        _ => -1.0,
    }
}

/// Correlator of two parties' ±1 outcomes in one cell, with the given
/// label-to-value maps.
pub fn cell_correlator(
    cell: &Cell,
    party_i: usize,
    party_j: usize,
    value_i: impl Fn(&str) -> f64,
    value_j: impl Fn(&str) -> f64,
) -> f64 {
    cell.iter()
        .map(|(key, &p)| value_i(&key[party_i]) * value_j(&key[party_j]) * p)
        .sum()
}

/// The 4-qubit state prepared by absorbing the BSM disambiguation
/// unitary into two Bell pairs on sites (A, CA, CB, B): eight amplitudes
/// ±1/(2√2), with minus signs on ∣1110⟩ and ∣1101⟩.
pub fn lambda_amplitudes() -> Vec<C64> {
    let a = 1.0 / (2.0 * std::f64::consts::SQRT_2);
    let mut amps = vec![C64::new(0.0, 0.0); 16];
    for (idx, sign) in [
        (0b0000, 1.0),
        (0b0011, 1.0),
        (0b1010, 1.0),
        (0b1001, 1.0),
        (0b0100, 1.0),
        (0b0111, 1.0),
        (0b1110, -1.0),
        (0b1101, -1.0),
    ] {
        amps[idx] = C64::new(sign * a, 0.0);
    }
    amps
}

/// Λ = (I ⊗ U ⊗ I)(Φ⁺_{A,CA} ⊗ Φ⁺_{CB,B}) built by gate application.
pub fn lambda_state() -> Result<PureState> {
    let pairs = tensor(
        &bell_state(BellKind::PhiPlus, "A", "CA")?,
        &bell_state(BellKind::PhiPlus, "CB", "B")?,
    )?;
    apply_gate(&pairs, &bsm_unitary("CA", "CB"))
}

/// Ξ: the six-qubit state absorbing both local BSM unitaries into the
/// three Bell pairs on sites (A, CA1, CA2, CB2, CB1, B).
pub fn xi_state() -> Result<PureState> {
    let pairs = tensor(
        &tensor(
            &bell_state(BellKind::PhiPlus, "A", "CA1")?,
            &bell_state(BellKind::PhiPlus, "CA2", "CB2")?,
        )?,
        &bell_state(BellKind::PhiPlus, "CB1", "B")?,
    )?;
    let s = apply_gate(&pairs, &bsm_unitary("CA1", "CA2"))?;
    apply_gate(&s, &bsm_unitary("CB2", "CB1"))
}
