//! Causal geometry of measurement events.
//!
//! Measurement events are points of Minkowski space (c = 1, one or two
//! spatial dimensions). Each maximal timelike path through the event set
//! is a possible route for quantum information and gets its own Hilbert
//! factor; an event's measurement may act only on the factors of paths
//! passing through it. [`validate`] checks a scenario's site-to-factor
//! assignment against that rule, which makes co-location vulnerabilities
//! explicit: a joint measurement is only legal at an event that all its
//! sites' paths traverse.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Interval classification tolerance around the light cone.
pub const LIGHTLIKE_TOL: f64 = 1e-12;

/// A measurement event at time `t` and spatial position `x`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Event {
    pub label: String,
    pub t: f64,
    pub x: Vec<f64>,
}

impl Event {
    pub fn new(label: impl Into<String>, t: f64, x: &[f64]) -> Event {
        Event { label: label.into(), t, x: x.to_vec() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interval {
    Timelike,
    Lightlike,
    Spacelike,
}

/// Sign of Δt² − ∣Δx∣²: positive is timelike, zero (within
/// [`LIGHTLIKE_TOL`]) lightlike, negative spacelike.
pub fn classify_pair(a: &Event, b: &Event) -> Result<Interval> {
    let dt = a.t - b.t;
    let dx2: f64 = a
        .x
        .iter()
        .zip(b.x.iter().chain(std::iter::repeat(&0.0)))
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        + b.x.iter().skip(a.x.len()).map(|q| q * q).sum::<f64>();
    let interval = dt * dt - dx2;
    if interval.abs() <= LIGHTLIKE_TOL && dt.abs() <= LIGHTLIKE_TOL && dx2 <= LIGHTLIKE_TOL {
        return Err(Error::CoincidentEvents(a.label.clone(), b.label.clone()));
    }
    Ok(if interval > LIGHTLIKE_TOL {
        Interval::Timelike
    } else if interval < -LIGHTLIKE_TOL {
        Interval::Spacelike
    } else {
        Interval::Lightlike
    })
}

fn strictly_precedes(a: &Event, b: &Event) -> Result<bool> {
    Ok(classify_pair(a, b)? == Interval::Timelike && a.t < b.t)
}

/// All maximal chains of the strict timelike order (future-directed).
/// Lightlike pairs do not chain. An event spacelike or lightlike to all
/// others yields a zero-length path. Paths are sorted by their label
/// sequences.
pub fn maximal_paths(events: &[Event]) -> Result<Vec<Vec<String>>> {
    let n = events.len();
    for (i, e) in events.iter().enumerate() {
        if events[..i].iter().any(|f| f.label == e.label) {
            return Err(Error::DuplicateSite(e.label.clone()));
        }
    }
    let mut before = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                before[i][j] = strictly_precedes(&events[i], &events[j])?;
            }
        }
    }
    // Hasse reduction: keep only covering edges.
    let mut cover = before.clone();
    for i in 0..n {
        for j in 0..n {
            if !before[i][j] {
                continue;
            }
            if (0..n).any(|k| before[i][k] && before[k][j]) {
                cover[i][j] = false;
            }
        }
    }
    let sources: Vec<usize> = (0..n)
        .filter(|&j| (0..n).all(|i| !before[i][j]))
        .collect();
    let mut paths = Vec::new();
    let mut stack: Vec<Vec<usize>> = sources.into_iter().map(|s| vec![s]).collect();
    while let Some(chain) = stack.pop() {
        let last = *chain.last().expect("chains are nonempty");
        let next: Vec<usize> = (0..n).filter(|&j| cover[last][j]).collect();
        if next.is_empty() {
            paths.push(
                chain
                    .iter()
                    .map(|&i| events[i].label.clone())
                    .collect::<Vec<_>>(),
            );
        } else {
            for j in next {
                let mut extended = chain.clone();
                extended.push(j);
                stack.push(extended);
            }
        }
    }
    paths.sort();
    Ok(paths)
}

/// Hilbert factors assigned to maximal paths: factor i is path i, and an
/// event carries the factors of every path through it.
#[derive(Clone, Debug, Serialize)]
pub struct FactorLayout {
    pub paths: Vec<Vec<String>>,
    pub event_factors: BTreeMap<String, BTreeSet<usize>>,
}

pub fn factor_layout(paths: &[Vec<String>]) -> FactorLayout {
    let mut event_factors: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (f, path) in paths.iter().enumerate() {
        for label in path {
            event_factors.entry(label.clone()).or_default().insert(f);
        }
    }
    FactorLayout { paths: paths.to_vec(), event_factors }
}

/// A site measured at an event whose factor's path misses that event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub event: String,
    pub site: String,
    pub factor: usize,
}

/// Check every instrument placement: an instrument at event `e` may only
/// touch sites whose factor's path passes through `e`.
pub fn validate(
    layout: &FactorLayout,
    instrument_sites: &BTreeMap<String, Vec<String>>,
    site_factors: &BTreeMap<String, usize>,
) -> Result<Vec<Violation>> {
    let mut violations = Vec::new();
    for (event, sites) in instrument_sites {
        for site in sites {
            let &factor = site_factors
                .get(site)
                .ok_or_else(|| Error::UnmappedSite(site.clone()))?;
            let on_path = layout
                .paths
                .get(factor)
                .map(|p| p.contains(event))
                .unwrap_or(false);
            if !on_path {
                violations.push(Violation {
                    event: event.clone(),
                    site: site.clone(),
                    factor,
                });
            }
        }
    }
    Ok(violations)
}

/// Events-file document: the event set plus the measurement placements
/// and site-to-factor assignment to validate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventsDoc {
    pub events: Vec<Event>,
    #[serde(default)]
    pub instrument_sites: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub site_factors: BTreeMap<String, usize>,
}

/// Report listing paths, the factor map, and any violations.
#[derive(Clone, Debug, Serialize)]
pub struct SpacetimeReport {
    pub paths: Vec<Vec<String>>,
    pub event_factors: BTreeMap<String, BTreeSet<usize>>,
    pub violations: Vec<Violation>,
}

pub fn analyze(doc: &EventsDoc) -> Result<SpacetimeReport> {
    let paths = maximal_paths(&doc.events)?;
    let layout = factor_layout(&paths);
    let violations = validate(&layout, &doc.instrument_sites, &doc.site_factors)?;
    Ok(SpacetimeReport {
        paths: layout.paths,
        event_factors: layout.event_factors,
        violations,
    })
}

/// The spacetime arrangement of the staged scenarios: wings C_A and C_B
/// measure at spacelike separation, the joint event C lies in both their
/// forward lightcones, and A, B are spacelike to everything.
pub fn bancal_events() -> EventsDoc {
    let events = vec![
        Event::new("A", 0.0, &[-4.0]),
        Event::new("C_A", 0.0, &[-1.0]),
        Event::new("C_B", 0.0, &[1.0]),
        Event::new("C", 1.5, &[0.0]),
        Event::new("B", 0.0, &[4.0]),
    ];
    let mut instrument_sites = BTreeMap::new();
    instrument_sites.insert("A".to_string(), vec!["A".to_string()]);
    instrument_sites.insert("C_A".to_string(), vec!["CA".to_string()]);
    instrument_sites.insert("C_B".to_string(), vec!["CB".to_string()]);
    instrument_sites.insert("C".to_string(), vec!["CA".to_string(), "CB".to_string()]);
    instrument_sites.insert("B".to_string(), vec!["B".to_string()]);
    // Path order is lexicographic: [A], [B], [C_A, C], [C_B, C].
    let mut site_factors = BTreeMap::new();
    site_factors.insert("A".to_string(), 0usize);
    site_factors.insert("B".to_string(), 1usize);
    site_factors.insert("CA".to_string(), 2usize);
    site_factors.insert("CB".to_string(), 3usize);
    EventsDoc { events, instrument_sites, site_factors }
}

/// A six-event instance with four maximal paths, one event on two
/// factors and another on exactly one of those.
pub fn six_event_example() -> Vec<Event> {
    vec![
        Event::new("A", 0.0, &[-5.0]),
        Event::new("B", 0.0, &[-1.0]),
        Event::new("C", 1.5, &[0.0]),
        Event::new("D", 1.0, &[-4.5]),
        Event::new("E", 0.0, &[1.0]),
        Event::new("F", 0.0, &[5.0]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_classification_examples() {
        let o = Event::new("o", 0.0, &[0.0]);
        let t = Event::new("t", 1.0, &[0.5]);
        let s = Event::new("s", 0.5, &[1.0]);
        let l = Event::new("l", 1.0, &[1.0]);
        assert_eq!(classify_pair(&o, &t).unwrap(), Interval::Timelike);
        assert_eq!(classify_pair(&o, &s).unwrap(), Interval::Spacelike);
        assert_eq!(classify_pair(&o, &l).unwrap(), Interval::Lightlike);
        // symmetry
        assert_eq!(classify_pair(&t, &o).unwrap(), Interval::Timelike);
        assert_eq!(classify_pair(&s, &o).unwrap(), Interval::Spacelike);
        // identical coordinates
        let o2 = Event::new("o2", 0.0, &[0.0]);
        assert!(matches!(
            classify_pair(&o, &o2),
            Err(Error::CoincidentEvents(_, _))
        ));
        // 1+2 dimensional coordinates
        let p = Event::new("p", 2.0, &[1.0, 1.0]);
        assert_eq!(classify_pair(&o, &p).unwrap(), Interval::Timelike);
    }

    #[test]
    fn single_event_yields_zero_length_path() {
        let paths = maximal_paths(&[Event::new("A", 0.0, &[0.0])]).unwrap();
        assert_eq!(paths, vec![vec!["A".to_string()]]);
    }

    #[test]
    fn transitive_chain_is_one_path() {
        let events = vec![
            Event::new("e1", 0.0, &[0.0]),
            Event::new("e2", 1.0, &[0.2]),
            Event::new("e3", 2.0, &[0.1]),
        ];
        // pairwise timelike and transitive
        assert!(strictly_precedes(&events[0], &events[1]).unwrap());
        assert!(strictly_precedes(&events[1], &events[2]).unwrap());
        assert!(strictly_precedes(&events[0], &events[2]).unwrap());
        let paths = maximal_paths(&events).unwrap();
        assert_eq!(paths, vec![vec!["e1".to_string(), "e2".into(), "e3".into()]]);
    }

    #[test]
    fn staged_layout_has_four_paths_and_validates() {
        let doc = bancal_events();
        let report = analyze(&doc).unwrap();
        assert_eq!(report.paths.len(), 4);
        assert_eq!(
            report.paths,
            vec![
                vec!["A".to_string()],
                vec!["B".to_string()],
                vec!["C_A".to_string(), "C".to_string()],
                vec!["C_B".to_string(), "C".to_string()],
            ]
        );
        assert!(report.violations.is_empty());
        // C lies on two factors
        assert_eq!(
            report.event_factors["C"],
            BTreeSet::from([2usize, 3usize])
        );
    }

    #[test]
    fn relocating_the_joint_measurement_violates() {
        let mut doc = bancal_events();
        doc.instrument_sites.insert(
            "C_A".to_string(),
            vec!["CA".to_string(), "CB".to_string()],
        );
        doc.instrument_sites.remove("C");
        let report = analyze(&doc).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(
            report.violations[0],
            Violation { event: "C_A".into(), site: "CB".into(), factor: 3 }
        );
    }

    #[test]
    fn unmapped_site_is_an_error() {
        let mut doc = bancal_events();
        doc.site_factors.remove("CB");
        assert!(matches!(analyze(&doc), Err(Error::UnmappedSite(_))));
    }

    #[test]
    fn path_cover_and_no_prefix() {
        let events = six_event_example();
        let paths = maximal_paths(&events).unwrap();
        assert_eq!(paths.len(), 4);
        // every event lies on at least one path
        let covered: BTreeSet<&String> = paths.iter().flatten().collect();
        assert_eq!(covered.len(), events.len());
        // no path is a prefix of another
        for (i, p) in paths.iter().enumerate() {
            for (j, q) in paths.iter().enumerate() {
                if i != j {
                    assert!(!(q.len() >= p.len() && &q[..p.len()] == p.as_slice()));
                }
            }
        }
        // the shared event carries two factors, its chain-mate one
        let layout = factor_layout(&paths);
        assert_eq!(layout.event_factors["C"].len(), 2);
        assert_eq!(layout.event_factors["B"].len(), 1);
        assert!(layout.event_factors["C"]
            .is_superset(&layout.event_factors["B"]));
        // isolated event gets exactly its own factor
        assert_eq!(layout.event_factors["F"].len(), 1);
    }
}
