//! JSON schemas for scenarios and behavior tables.
//!
//! Scenario documents carry `sites`, an ordered `state` constructor
//! list (`{"bell": [a, b]}`, `{"gate": {...}}`, `{"amplitudes": [...]}`),
//! `round_types`, `parties` with per-round custody, `instruments` per
//! party and round, and optional `alignment` label maps. Behavior
//! documents list one cell per (round, settings) combination with
//! probabilities as 15-significant-digit decimal strings, keeping
//! reports byte-stable across platforms.

use super::{
    BehaviorTable, Cell, Instrument, OutcomeClass, PartySlot, RoundBehavior, RoundSpec,
    Scenario, StateCtor,
};
use crate::bell::{bsm_matrix, cnot_matrix, hadamard_matrix, pauli_x, pauli_z};
use crate::qsim::{GateOp, Register};
use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Probability as a decimal string with 15 significant digits.
pub fn fmt_prob(p: f64) -> String {
    format!("{p:.14e}")
}

fn parse_prob(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Input(format!("bad probability `{s}`")))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiteDoc {
    pub label: String,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CtorDoc {
    Bell([String; 2]),
    Gate(GateDoc),
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
    pub sites: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassDoc {
    pub label: String,
    pub outcomes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstrumentDoc {
    pub label: String,
    #[serde(default)]
    pub rotation: Vec<GateDoc>,
    pub sites: Vec<String>,
    pub classes: Vec<ClassDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartyDoc {
    pub name: String,
    /// Round type → sites in custody.
    pub custody: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub name: String,
    pub sites: Vec<SiteDoc>,
    pub state: Vec<CtorDoc>,
    pub round_types: Vec<String>,
    pub parties: Vec<PartyDoc>,
    /// Party → round type → settings.
    pub instruments: BTreeMap<String, BTreeMap<String, Vec<InstrumentDoc>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub alignment: BTreeMap<String, BTreeMap<String, String>>,
}

fn complex_doc(c: &C64) -> [f64; 2] {
    [c.re, c.im]
}

fn matrix_doc(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| complex_doc(&m[(r, c)])).collect())
        .collect()
}

fn gate_doc(g: &GateOp) -> GateDoc {
    GateDoc {
        name: None,
        matrix: Some(matrix_doc(g.matrix())),
        sites: g.targets().to_vec(),
    }
}

fn named_gate_matrix(name: &str) -> Result<DMatrix<C64>> {
    let c = |re: f64| C64::new(re, 0.0);
    Ok(match name {
        "h" => hadamard_matrix(),
        "x" => pauli_x(),
        "z" => pauli_z(),
        "y" => DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        ),
        "cnot" => cnot_matrix(),
        "swap" => DMatrix::from_row_slice(
            4,
            4,
            &[
                c(1.0), c(0.0), c(0.0), c(0.0),
                c(0.0), c(0.0), c(1.0), c(0.0),
                c(0.0), c(1.0), c(0.0), c(0.0),
                c(0.0), c(0.0), c(0.0), c(1.0),
            ],
        ),
        "bsm" => bsm_matrix(),
        "bsm_dag" => bsm_matrix().adjoint(),
        other => return Err(Error::Input(format!("unknown gate name `{other}`"))),
    })
}

/// Merge the rounds' slot orders into one party sequence that respects
/// each round's order (Kahn's algorithm, first-encounter tie-break). A
/// conflicting pair of orders falls back to first-encounter order.
fn party_order(rounds: &[RoundSpec]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for round in rounds {
        for slot in &round.slots {
            if !names.contains(&slot.party) {
                names.push(slot.party.clone());
            }
        }
    }
    let index = |n: &str| names.iter().position(|m| m == n).expect("known party");
    let mut edges = vec![vec![false; names.len()]; names.len()];
    for round in rounds {
        for pair in round.slots.windows(2) {
            edges[index(&pair[0].party)][index(&pair[1].party)] = true;
        }
    }
    let mut order = Vec::new();
    let mut placed = vec![false; names.len()];
    while order.len() < names.len() {
        let next = (0..names.len()).find(|&j| {
            !placed[j] && (0..names.len()).all(|i| placed[i] || !edges[i][j])
        });
        match next {
            Some(j) => {
                placed[j] = true;
                order.push(names[j].clone());
            }
            None => return names, // cyclic orders: keep first-encounter
        }
    }
    order
}

fn gate_from_doc(doc: &GateDoc) -> Result<GateOp> {
    let matrix = match (&doc.name, &doc.matrix) {
        (Some(name), None) => named_gate_matrix(name)?,
        (None, Some(rows)) => {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::Input("gate matrix is not square".into()));
            }
            DMatrix::from_fn(n, n, |r, c| C64::new(rows[r][c][0], rows[r][c][1]))
        }
        _ => {
            return Err(Error::Input(
                "gate needs exactly one of `name` or `matrix`".into(),
            ))
        }
    };
    GateOp::new(matrix, doc.sites.clone())
}

impl Scenario {
    pub fn to_doc(&self) -> ScenarioDoc {
        let sites = self
            .register
            .sites()
            .iter()
            .map(|s| SiteDoc { label: s.label.clone(), dim: s.dim })
            .collect();
        let state = self
            .initial
            .iter()
            .map(|ctor| match ctor {
                StateCtor::Bell { a, b } => CtorDoc::Bell([a.clone(), b.clone()]),
                StateCtor::Gate(g) => CtorDoc::Gate(gate_doc(g)),
                StateCtor::Amplitudes(v) => {
                    CtorDoc::Amplitudes(v.iter().map(complex_doc).collect())
                }
            })
            .collect();
        let round_types = self.rounds.iter().map(|r| r.name.clone()).collect();
        // The parties list fixes slot order on re-ingestion, so merge the
        // per-round orders into one sequence consistent with each round.
        let mut parties: Vec<PartyDoc> = party_order(&self.rounds)
            .into_iter()
            .map(|name| PartyDoc { name, custody: BTreeMap::new() })
            .collect();
        let mut instruments: BTreeMap<String, BTreeMap<String, Vec<InstrumentDoc>>> =
            BTreeMap::new();
        for round in &self.rounds {
            for slot in &round.slots {
                let party = parties
                    .iter_mut()
                    .find(|p| p.name == slot.party)
                    .expect("party order covers every slot");
                party.custody.insert(round.name.clone(), slot.custody.clone());
                let docs = slot
                    .settings
                    .iter()
                    .map(|i| InstrumentDoc {
                        label: i.label.clone(),
                        rotation: i.rotation.iter().map(gate_doc).collect(),
                        sites: i.sites.clone(),
                        classes: i
                            .classes
                            .iter()
                            .map(|c| ClassDoc { label: c.label.clone(), outcomes: c.outcomes.clone() })
                            .collect(),
                    })
                    .collect();
                instruments
                    .entry(slot.party.clone())
                    .or_default()
                    .insert(round.name.clone(), docs);
            }
        }
        ScenarioDoc {
            name: self.name.clone(),
            sites,
            state,
            round_types,
            parties,
            instruments,
            alignment: self.alignment.clone(),
        }
    }

    pub fn from_doc(doc: &ScenarioDoc) -> Result<Scenario> {
        let register = Register::new(
            doc.sites
                .iter()
                .map(|s| (s.label.clone(), s.dim))
                .collect::<Vec<_>>(),
        )?;
        let initial = doc
            .state
            .iter()
            .map(|ctor| {
                Ok(match ctor {
                    CtorDoc::Bell([a, b]) => StateCtor::Bell { a: a.clone(), b: b.clone() },
                    CtorDoc::Gate(g) => StateCtor::Gate(gate_from_doc(g)?),
                    CtorDoc::Amplitudes(v) => StateCtor::Amplitudes(
                        v.iter().map(|&[re, im]| C64::new(re, im)).collect(),
                    ),
                })
            })
            .collect::<Result<_>>()?;
        let mut rounds = Vec::new();
        for round_name in &doc.round_types {
            let mut slots = Vec::new();
            for party in &doc.parties {
                let Some(settings) = doc
                    .instruments
                    .get(&party.name)
                    .and_then(|per_round| per_round.get(round_name))
                else {
                    continue;
                };
                let custody = party
                    .custody
                    .get(round_name)
                    .cloned()
                    .unwrap_or_default();
                let settings = settings
                    .iter()
                    .map(|i| {
                        Ok(Instrument {
                            label: i.label.clone(),
                            rotation: i
                                .rotation
                                .iter()
                                .map(gate_from_doc)
                                .collect::<Result<_>>()?,
                            sites: i.sites.clone(),
                            classes: i
                                .classes
                                .iter()
                                .map(|c| OutcomeClass {
                                    label: c.label.clone(),
                                    outcomes: c.outcomes.clone(),
                                })
                                .collect(),
                        })
                    })
                    .collect::<Result<_>>()?;
                slots.push(PartySlot { party: party.name.clone(), custody, settings });
            }
            rounds.push(RoundSpec { name: round_name.clone(), slots });
        }
        let sc = Scenario {
            name: doc.name.clone(),
            register,
            initial,
            rounds,
            alignment: doc.alignment.clone(),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Scenario> {
        let doc: ScenarioDoc =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("scenario JSON: {e}")))?;
        Scenario::from_doc(&doc)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundMetaDoc {
    pub round: String,
    pub parties: Vec<String>,
    pub setting_counts: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellDoc {
    pub round: String,
    pub settings: Vec<usize>,
    /// Outcome tuple (labels joined by commas) → probability string.
    pub dist: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BehaviorDoc {
    pub scenario: String,
    pub rounds: Vec<RoundMetaDoc>,
    pub cells: Vec<CellDoc>,
}

impl BehaviorTable {
    pub fn to_doc(&self) -> BehaviorDoc {
        let rounds = self
            .rounds
            .iter()
            .map(|r| RoundMetaDoc {
                round: r.round.clone(),
                parties: r.parties.clone(),
                setting_counts: r.setting_counts.clone(),
            })
            .collect();
        let mut cells = Vec::new();
        for round in &self.rounds {
            for (settings, cell) in &round.cells {
                let dist = cell
                    .iter()
                    .map(|(key, &p)| (key.join(","), fmt_prob(p)))
                    .collect();
                cells.push(CellDoc {
                    round: round.round.clone(),
                    settings: settings.clone(),
                    dist,
                });
            }
        }
        BehaviorDoc { scenario: self.scenario.clone(), rounds, cells }
    }

    pub fn from_doc(doc: &BehaviorDoc) -> Result<BehaviorTable> {
        let mut rounds: Vec<RoundBehavior> = doc
            .rounds
            .iter()
            .map(|r| RoundBehavior {
                round: r.round.clone(),
                parties: r.parties.clone(),
                setting_counts: r.setting_counts.clone(),
                cells: BTreeMap::new(),
            })
            .collect();
        for cell_doc in &doc.cells {
            let round = rounds
                .iter_mut()
                .find(|r| r.round == cell_doc.round)
                .ok_or_else(|| {
                    Error::Input(format!("cell references unknown round `{}`", cell_doc.round))
                })?;
            let n_parties = round.parties.len();
            let mut cell: Cell = BTreeMap::new();
            for (key, prob) in &cell_doc.dist {
                let labels: Vec<String> = key.split(',').map(|s| s.to_string()).collect();
                if labels.len() != n_parties {
                    return Err(Error::Input(format!(
                        "outcome tuple `{key}` has {} labels, round `{}` has {} parties",
                        labels.len(),
                        cell_doc.round,
                        n_parties
                    )));
                }
                cell.insert(labels, parse_prob(prob)?);
            }
            round.cells.insert(cell_doc.settings.clone(), cell);
        }
        Ok(BehaviorTable { scenario: doc.scenario.clone(), rounds })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("behavior serializes")
    }

    pub fn from_json(s: &str) -> Result<BehaviorTable> {
        let doc: BehaviorDoc =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("behavior JSON: {e}")))?;
        BehaviorTable::from_doc(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{behavior, build_builtin, compare_behaviors};
    use super::*;

    #[test]
    fn scenario_round_trips_through_json() {
        for name in super::super::BUILTIN_NAMES {
            let sc = build_builtin(name).unwrap();
            let json = sc.to_json();
            let back = Scenario::from_json(&json).unwrap();
            let t1 = behavior(&sc).unwrap();
            let t2 = behavior(&back).unwrap();
            let cmp = compare_behaviors(&t1, &t2, 1e-12).unwrap();
            assert!(cmp.equivalent, "{name}: TV = {}", cmp.max_tv);
        }
    }

    #[test]
    fn behavior_round_trips_through_json() {
        let t = behavior(&build_builtin("rabelo-original").unwrap()).unwrap();
        let json = t.to_json();
        let back = BehaviorTable::from_json(&json).unwrap();
        let cmp = compare_behaviors(&t, &back, 1e-12).unwrap();
        assert!(cmp.equivalent);
        // parsing the same strings twice is exact
        let again = BehaviorTable::from_json(&json).unwrap();
        let cmp = compare_behaviors(&back, &again, 0.0).unwrap();
        assert_eq!(cmp.max_tv, 0.0);
    }

    #[test]
    fn named_gates_parse() {
        let doc = GateDoc {
            name: Some("bsm".into()),
            matrix: None,
            sites: vec!["a".into(), "b".into()],
        };
        let g = gate_from_doc(&doc).unwrap();
        assert_eq!(g.dim(), 4);
        assert!(gate_from_doc(&GateDoc {
            name: Some("nope".into()),
            matrix: None,
            sites: vec!["a".into()],
        })
        .is_err());
    }

    #[test]
    fn probability_strings_have_15_significant_digits() {
        assert_eq!(fmt_prob(0.25), "2.50000000000000e-1");
        assert_eq!(fmt_prob(1.0), "1.00000000000000e0");
        let third = 1.0 / 3.0;
        assert_eq!(fmt_prob(third), "3.33333333333333e-1");
        assert!((parse_prob(&fmt_prob(third)).unwrap() - third).abs() < 1e-14);
    }
}
