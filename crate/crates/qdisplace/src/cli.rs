//! Command dispatch and report emission for batch verification runs.
//!
//! Four subcommands cover the library's surfaces:
//!
//! - `behavior` — exact behavior table of a built-in or JSON scenario
//!   (`--dump-scenario` emits the scenario document instead),
//! - `compare` — total-variation comparison of two behaviors,
//! - `localize` — run the measurement-localization protocol and check it
//!   against the direct Born oracle,
//! - `spacetime` — maximal timelike paths, factor layout, and placement
//!   violations for an events file.
//!
//! Exit codes are a stable contract: 0 success/equivalent, 1 a check
//! failed, 2 input error. Reports are deterministic for fixed inputs and
//! seed (wall time goes to stderr, probabilities are fixed-precision
//! decimal strings).

use crate::localize::{
    self, build, run_branching, run_deferred, success_probability, TargetClass,
    TargetMeasurement,
};
use crate::qsim::{PureState, Register};
use crate::scenario::{
    behavior, build_builtin, compare_behaviors, fmt_prob, BehaviorTable, Scenario,
    BUILTIN_NAMES,
};
use crate::spacetime::{analyze, EventsDoc};
use crate::{C64, Error, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "qdisplace", version, about = "Exact simulation of measurement-displacement models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the exact behavior table of a scenario.
    Behavior {
        /// Built-in scenario name.
        #[arg(long, conflicts_with = "scenario")]
        builtin: Option<String>,
        /// Scenario JSON file.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Emit the scenario document instead of its behavior.
        #[arg(long)]
        dump_scenario: bool,
        /// Write output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two behaviors (builtin name, scenario JSON, or behavior JSON).
    Compare {
        a: String,
        b: String,
        /// Equivalence tolerance on the max total-variation distance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the measurement-localization protocol.
    Localize {
        /// `computational`, `bsm`, `random`, or a measurement JSON file.
        #[arg(long)]
        measurement: String,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        /// `deferred` (level 1 only) or `branching`.
        #[arg(long, default_value = "deferred")]
        mode: String,
        /// `random`, `basis:K`, or a state JSON file. Defaults to random.
        #[arg(long)]
        state: Option<String>,
        /// Seed for random targets and states.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze an events file: paths, factors, violations.
    Spacetime {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct InputDigest {
    source: String,
    sha256: String,
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
}

#[derive(Serialize)]
struct RunReport {
    command: String,
    inputs: BTreeMap<String, InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    results: serde_json::Value,
    checks: Vec<Check>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn digest_of(source: &str, bytes: &[u8]) -> InputDigest {
    InputDigest { source: source.to_string(), sha256: sha256_hex(bytes) }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Entry point for the `qdisplace` binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    eprintln!("wall time: {} ms", start.elapsed().as_millis());
    code
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Behavior { builtin, scenario, dump_scenario, out } => {
            cmd_behavior(builtin.as_deref(), scenario.as_deref(), dump_scenario, out.as_ref())
        }
        Command::Compare { a, b, tol, out } => cmd_compare(&a, &b, tol, out.as_ref()),
        Command::Localize { measurement, levels, mode, state, seed, out } => {
            cmd_localize(&measurement, levels, &mode, state.as_deref(), seed, out.as_ref())
        }
        Command::Spacetime { events, out } => cmd_spacetime(&events, out.as_ref()),
    }
}

fn load_scenario(
    builtin: Option<&str>,
    file: Option<&Path>,
) -> Result<(Scenario, String, Vec<u8>)> {
    match (builtin, file) {
        (Some(name), None) => {
            let sc = build_builtin(name)?;
            let bytes = sc.to_json().into_bytes();
            Ok((sc, format!("builtin:{name}"), bytes))
        }
        (None, Some(path)) => {
            let text = read_file(path)?;
            let sc = Scenario::from_json(&text)?;
            Ok((sc, path.display().to_string(), text.into_bytes()))
        }
        _ => Err(Error::Input(
            "pass exactly one of --builtin or --scenario".into(),
        )),
    }
}

fn cmd_behavior(
    builtin: Option<&str>,
    file: Option<&Path>,
    dump_scenario: bool,
    out: Option<&PathBuf>,
) -> Result<i32> {
    let (sc, _, _) = load_scenario(builtin, file)?;
    if dump_scenario {
        emit(out, &sc.to_json())?;
        return Ok(0);
    }
    let table = behavior(&sc)?;
    emit(out, &table.to_json())?;
    Ok(0)
}

/// Resolve a compare argument: a builtin name, a scenario JSON file, or
/// a behavior JSON file.
fn resolve_behavior(arg: &str) -> Result<(BehaviorTable, InputDigest)> {
    if BUILTIN_NAMES.contains(&arg) {
        let sc = build_builtin(arg)?;
        let digest = digest_of(&format!("builtin:{arg}"), sc.to_json().as_bytes());
        return Ok((behavior(&sc)?, digest));
    }
    let path = Path::new(arg);
    let text = read_file(path)?;
    let digest = digest_of(arg, text.as_bytes());
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Input(format!("{arg}: not valid JSON: {e}")))?;
    if value.get("cells").is_some() {
        Ok((BehaviorTable::from_json(&text)?, digest))
    } else {
        let sc = Scenario::from_json(&text)?;
        Ok((behavior(&sc)?, digest))
    }
}

fn cmd_compare(a: &str, b: &str, tol: f64, out: Option<&PathBuf>) -> Result<i32> {
    let (table_a, digest_a) = resolve_behavior(a)?;
    let (table_b, digest_b) = resolve_behavior(b)?;
    let cmp = compare_behaviors(&table_a, &table_b, tol)?;
    let mut inputs = BTreeMap::new();
    inputs.insert("a".to_string(), digest_a);
    inputs.insert("b".to_string(), digest_b);
    let report = RunReport {
        command: format!("compare {a} {b} --tol {tol:e}"),
        inputs,
        seed: None,
        results: json!({
            "max_tv": fmt_prob(cmp.max_tv),
            "cells_compared": cmp.cells_compared,
            "verdict": if cmp.equivalent { "equivalent" } else { "inequivalent" },
        }),
        checks: vec![Check { name: "behaviors-equivalent".into(), pass: cmp.equivalent }],
    };
    emit(out, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(if cmp.equivalent { 0 } else { 1 })
}

#[derive(Deserialize)]
struct MeasurementDoc {
    /// Four orthonormal eigenvectors (rows of [re, im] pairs).
    eigenvectors: Vec<Vec<[f64; 2]>>,
    classes: Vec<MeasurementClassDoc>,
}

#[derive(Deserialize)]
struct MeasurementClassDoc {
    label: String,
    members: Vec<usize>,
}

fn load_measurement(descriptor: &str, rng: &mut ChaCha8Rng) -> Result<(TargetMeasurement, Vec<u8>)> {
    match descriptor {
        "computational" => Ok((TargetMeasurement::computational(), b"computational".to_vec())),
        "bsm" => Ok((TargetMeasurement::bsm(), b"bsm".to_vec())),
        "random" => Ok((localize::random_target(rng), b"random".to_vec())),
        path => {
            let text = read_file(Path::new(path))?;
            let doc: MeasurementDoc = serde_json::from_str(&text)
                .map_err(|e| Error::Input(format!("measurement JSON: {e}")))?;
            let eigenvectors: Vec<Vec<C64>> = doc
                .eigenvectors
                .iter()
                .map(|row| row.iter().map(|&[re, im]| C64::new(re, im)).collect())
                .collect();
            let classes = doc
                .classes
                .into_iter()
                .map(|c| TargetClass { label: c.label, members: c.members })
                .collect();
            Ok((TargetMeasurement::new(eigenvectors, classes)?, text.into_bytes()))
        }
    }
}

#[derive(Deserialize)]
struct StateDoc {
    amplitudes: Vec<[f64; 2]>,
}

fn load_state(descriptor: Option<&str>, rng: &mut ChaCha8Rng) -> Result<(PureState, Vec<u8>)> {
    let reg = Register::qubits(&["phi.a", "phi.b"])?;
    match descriptor {
        None | Some("random") => Ok((
            localize::random_two_qubit_state(rng, "phi.a", "phi.b"),
            b"random".to_vec(),
        )),
        Some(desc) if desc.starts_with("basis:") => {
            let k: usize = desc[6..]
                .parse()
                .map_err(|_| Error::Input(format!("bad basis index in `{desc}`")))?;
            Ok((crate::qsim::init_state(&reg, k)?, desc.as_bytes().to_vec()))
        }
        Some(path) => {
            let text = read_file(Path::new(path))?;
            let doc: StateDoc = serde_json::from_str(&text)
                .map_err(|e| Error::Input(format!("state JSON: {e}")))?;
            let amps: Vec<C64> = doc.amplitudes.iter().map(|&[re, im]| C64::new(re, im)).collect();
            Ok((PureState::from_amplitudes(reg, amps)?, text.into_bytes()))
        }
    }
}

fn tv_of_maps(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (a.get(*k).copied().unwrap_or(0.0) - b.get(*k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

fn cmd_localize(
    measurement: &str,
    levels: usize,
    mode: &str,
    state: Option<&str>,
    seed: u64,
    out: Option<&PathBuf>,
) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (target, m_bytes) = load_measurement(measurement, &mut rng)?;
    let (phi, s_bytes) = load_state(state, &mut rng)?;

    let (decoded, success) = match mode {
        "deferred" => {
            if levels != 1 {
                return Err(Error::DeferredLevelCap(levels));
            }
            let circuit = build(&target, levels)?;
            let run = run_deferred(&circuit, &phi)?;
            (run.conditional(), run.success_probability())
        }
        "branching" => {
            let run = run_branching(&target, levels, &phi)?;
            (run.conditional(), run.success_probability())
        }
        other => return Err(Error::Input(format!("unknown mode `{other}`"))),
    };

    let oracle = target.born(&phi)?;
    let tv = tv_of_maps(&decoded, &oracle);
    let exact = success_probability(levels)?;
    let exact_f = {
        use num_traits::ToPrimitive;
        exact.to_f64().unwrap_or(f64::NAN)
    };
    let ancillas = build(&target, levels)?.ledger.len();

    let success_ok = (success - exact_f).abs() < 1e-9;
    let tv_ok = tv < 1e-9;

    let mut inputs = BTreeMap::new();
    inputs.insert("measurement".to_string(), digest_of(measurement, &m_bytes));
    inputs.insert(
        "state".to_string(),
        digest_of(state.unwrap_or("random"), &s_bytes),
    );
    let report = RunReport {
        command: format!(
            "localize --measurement {measurement} --levels {levels} --mode {mode} --seed {seed}"
        ),
        inputs,
        seed: Some(seed),
        results: json!({
            "levels": levels,
            "mode": mode,
            "ancilla_pairs": ancillas,
            "success_probability": fmt_prob(success),
            "success_probability_exact": exact.to_string(),
            "conditional_tv_vs_born": fmt_prob(tv),
            "conditional_distribution": decoded
                .iter()
                .map(|(k, &v)| (k.clone(), fmt_prob(v)))
                .collect::<BTreeMap<String, String>>(),
        }),
        checks: vec![
            Check { name: "success-probability-exact".into(), pass: success_ok },
            Check { name: "conditional-matches-born".into(), pass: tv_ok },
        ],
    };
    emit(out, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(if success_ok && tv_ok { 0 } else { 1 })
}

fn cmd_spacetime(events: &Path, out: Option<&PathBuf>) -> Result<i32> {
    let text = read_file(events)?;
    let doc: EventsDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Input(format!("events JSON: {e}")))?;
    let report = analyze(&doc)?;
    let ok = report.violations.is_empty();
    let mut inputs = BTreeMap::new();
    inputs.insert(
        "events".to_string(),
        digest_of(&events.display().to_string(), text.as_bytes()),
    );
    let run = RunReport {
        command: format!("spacetime --events {}", events.display()),
        inputs,
        seed: None,
        results: serde_json::to_value(&report).expect("report serializes"),
        checks: vec![Check { name: "no-placement-violations".into(), pass: ok }],
    };
    emit(out, &serde_json::to_string_pretty(&run).expect("report serializes"))?;
    Ok(if ok { 0 } else { 1 })
}
