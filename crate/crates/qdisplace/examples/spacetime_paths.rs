//! Causal layouts, Hilbert factors, and placement validation.
//!
//! Each maximal timelike path through the measurement events carries its
//! own Hilbert factor; a measurement may only touch factors whose paths
//! pass through its event. The staged layout places the joint event C in
//! the forward lightcone of both wings, which is exactly what licenses
//! the BSM there — and moving it to a wing produces a violation.
//!
//! Run with: cargo run --example spacetime_paths

use qdisplace::spacetime::{
    analyze, bancal_events, classify_pair, factor_layout, maximal_paths, six_event_example,
    Interval,
};

fn main() {
    let doc = bancal_events();
    println!("staged layout events:");
    for e in &doc.events {
        println!("  {:>4} at t = {:+.1}, x = {:+.1}", e.label, e.t, e.x[0]);
    }
    let c = doc.events.iter().find(|e| e.label == "C").unwrap();
    let ca = doc.events.iter().find(|e| e.label == "C_A").unwrap();
    let a = doc.events.iter().find(|e| e.label == "A").unwrap();
    assert_eq!(classify_pair(ca, c).unwrap(), Interval::Timelike);
    assert_eq!(classify_pair(a, c).unwrap(), Interval::Spacelike);

    let report = analyze(&doc).unwrap();
    println!("\nmaximal timelike paths (one Hilbert factor each):");
    for (i, path) in report.paths.iter().enumerate() {
        println!("  H{}: {}", i, path.join(" → "));
    }
    assert_eq!(report.paths.len(), 4);
    println!("violations: {}", report.violations.len());
    assert!(report.violations.is_empty());

    // Relocate the joint measurement to the C_A wing.
    let mut moved = doc.clone();
    moved
        .instrument_sites
        .insert("C_A".into(), vec!["CA".into(), "CB".into()]);
    moved.instrument_sites.remove("C");
    let report = analyze(&moved).unwrap();
    println!("\nafter moving the joint measurement to C_A:");
    for v in &report.violations {
        println!(
            "  violation: site `{}` (factor H{}) measured at `{}`, which its path misses",
            v.site, v.factor, v.event
        );
    }
    assert_eq!(report.violations.len(), 1);

    // A larger instance: six events, four factors, one event on two
    // factors and a chain-mate on exactly one of them.
    let events = six_event_example();
    let paths = maximal_paths(&events).unwrap();
    let layout = factor_layout(&paths);
    println!("\nsix-event instance:");
    for (i, path) in layout.paths.iter().enumerate() {
        println!("  H{}: {}", i, path.join(" → "));
    }
    println!(
        "  C acts on factors {:?}, B on {:?}",
        layout.event_factors["C"], layout.event_factors["B"]
    );
    assert_eq!(layout.paths.len(), 4);
    assert_eq!(layout.event_factors["C"].len(), 2);
    assert_eq!(layout.event_factors["B"].len(), 1);
    println!("\nPlacement rules hold exactly where the layouts say they should.");
}
