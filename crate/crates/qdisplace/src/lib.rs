//! Exact simulation of measurement-displacement models.
//!
//! This crate studies experiments in which a joint ("entangled") quantum
//! measurement can be traded for extra entanglement in the prepared state,
//! leaving only product measurements behind. It provides:
//!
//! - [`qsim`] — an exact pure-state simulator over registers of labeled
//!   sites with arbitrary per-site dimensions (qubits, ququarts, ...),
//! - [`bell`] — Bell states, the Bell-state-measurement disambiguation
//!   circuit, uncorrected teleportation fragments, and CHSH scoring,
//! - [`entangle`] — Schmidt decompositions, entanglement entropy,
//!   product/entangled verdicts for measurements, and qudit coarsening,
//! - [`scenario`] — built-in measurement scenarios (the Rabelo and Bancal
//!   families and their displaced counter-models), exact behavior tables,
//!   behavior comparison, entanglement-swap composition, and the generic
//!   measurement-displacement rewrite,
//! - [`spacetime`] — lightcone classification, maximal timelike paths,
//!   Hilbert-factor layouts, and scenario legality validation,
//! - [`localize`] — a teleportation-based protocol that replicates an
//!   arbitrary two-qubit projective measurement using only computational
//!   basis readouts, with exact success-probability accounting.
//!
//! Every distribution in this crate is computed by exact Born-rule
//! enumeration; there is no sampling noise anywhere.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability, and the `qdisplace` binary for batch verification runs.

pub mod bell;
pub mod cli;
pub mod entangle;
pub mod localize;
pub mod qsim;
pub mod scenario;
pub mod spacetime;

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate site label `{0}`")]
    DuplicateSite(String),
    #[error("unknown site `{0}`")]
    UnknownSite(String),
    #[error("site dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("basis index {index} out of range for register of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("gate matrix is {rows}x{cols}, expected {expected}x{expected} for its target sites")]
    GateShape { rows: usize, cols: usize, expected: usize },
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("amplitude vector has length {got}, register has dimension {want}")]
    AmplitudeLength { got: usize, want: usize },
    #[error("registers differ: {0}")]
    RegisterMismatch(String),
    #[error("requested branch has probability {0:.3e}, below the zero cutoff")]
    ZeroProbabilityBranch(f64),
    #[error("probability {0:.3e} is negative beyond tolerance")]
    NegativeProbability(f64),
    #[error("distribution sums to {0}, expected 1")]
    BadDistributionSum(f64),
    #[error("register of dimension {dim} exceeds the dense cap of {cap} qubit-equivalents")]
    DenseCapExceeded { dim: usize, cap: u32 },
    #[error("bipartition does not cover the register: {0}")]
    BadBipartition(String),
    #[error("site group {0:?} is not contiguous in register order")]
    NonContiguousGroup(Vec<String>),
    #[error("outcome class `{label}` has rank {rank}; separability verdicts need rank-1 classes")]
    UnsupportedClassRank { label: String, rank: usize },
    #[error("instrument is malformed: {0}")]
    BadInstrument(String),
    #[error("scenario is malformed: {0}")]
    BadScenario(String),
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
    #[error("behavior tables have different structure: {0}")]
    StructureMismatch(String),
    #[error("unknown wing `{0}`")]
    UnknownWing(String),
    #[error("events have identical coordinates: `{0}` and `{1}`")]
    CoincidentEvents(String, String),
    #[error("site `{0}` has no assigned Hilbert factor")]
    UnmappedSite(String),
    #[error("projector set is not complete: {0}")]
    IncompleteProjectors(String),
    #[error("protocol needs at least one level, got {0}")]
    BadLevelCount(usize),
    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("outcome string has {got} bits, circuit has {want} wires")]
    BadOutcomeString { got: usize, want: usize },
    #[error("deferred mode supports level 1 only, got {0}")]
    DeferredLevelCap(usize),
    #[error("branching tree budget is {cap} levels, got {got}")]
    TreeBudgetExceeded { got: usize, cap: usize },
    #[error("measurement displacement needs {0}")]
    UnsupportedMeasurementShape(String),
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
