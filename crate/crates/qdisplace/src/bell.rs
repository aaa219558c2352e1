//! Bell states, the disambiguated Bell state measurement, uncorrected
//! teleportation fragments, and CHSH machinery.
//!
//! The Bell state measurement (BSM) is rewritten throughout this crate as
//! a fixed two-qubit unitary `U = (H ⊗ I)·CNOT` followed by two
//! independent computational basis readouts. `U` maps the Bell basis onto
//! the computational basis, so the readout bits `(z, x)` name the Bell
//! projector directly: Φ⁺↔(0,0), Φ⁻↔(1,0), Ψ⁺↔(0,1), Ψ⁻↔(1,1). The first
//! bit is the phase bit and the second is the flip bit, fixed by the
//! Hadamard acting on the first target site.

use crate::qsim::{apply_gate, born_distribution, GateOp, PureState, Register};
use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

/// The four canonical Bell states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

pub const BELL_KINDS: [BellKind; 4] = [
    BellKind::PhiPlus,
    BellKind::PhiMinus,
    BellKind::PsiPlus,
    BellKind::PsiMinus,
];

impl BellKind {
    /// The (phase, flip) bit pair of this Bell state.
    pub fn bits(self) -> (u8, u8) {
        match self {
            BellKind::PhiPlus => (0, 0),
            BellKind::PhiMinus => (1, 0),
            BellKind::PsiPlus => (0, 1),
            BellKind::PsiMinus => (1, 1),
        }
    }

    pub fn from_bits(z: u8, x: u8) -> BellKind {
        match (z & 1, x & 1) {
            (0, 0) => BellKind::PhiPlus,
            (1, 0) => BellKind::PhiMinus,
            (0, 1) => BellKind::PsiPlus,
            (1, 1) => BellKind::PsiMinus,
            _ => unreachable!(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "Phi+",
            BellKind::PhiMinus => "Phi-",
            BellKind::PsiPlus => "Psi+",
            BellKind::PsiMinus => "Psi-",
        }
    }

    pub fn from_label(s: &str) -> Option<BellKind> {
        BELL_KINDS.iter().copied().find(|k| k.label() == s)
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The named Bell state on two distinct qubit sites, normalized 1/√2.
pub fn bell_state(kind: BellKind, site_a: &str, site_b: &str) -> Result<PureState> {
    if site_a == site_b {
        return Err(Error::DuplicateSite(site_a.to_string()));
    }
    let reg = Register::qubits(&[site_a, site_b])?;
    let h = FRAC_1_SQRT_2;
    let amps = match kind {
        BellKind::PhiPlus => vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)],
        BellKind::PhiMinus => vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)],
        BellKind::PsiPlus => vec![c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)],
        BellKind::PsiMinus => vec![c(0.0, 0.0), c(h, 0.0), c(-h, 0.0), c(0.0, 0.0)],
    };
    PureState::from_amplitudes(reg, amps)
}

/// Hadamard matrix.
pub fn hadamard_matrix() -> DMatrix<C64> {
    let h = FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

/// CNOT with the first index as control.
pub fn cnot_matrix() -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(4, 4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(1, 1)] = c(1.0, 0.0);
    m[(2, 3)] = c(1.0, 0.0);
    m[(3, 2)] = c(1.0, 0.0);
    m
}

/// The BSM disambiguation unitary `U = (H ⊗ I)·CNOT` as a 4×4 matrix;
/// the first tensor factor carries the Hadamard and the CNOT control.
pub fn bsm_matrix() -> DMatrix<C64> {
    let h = hadamard_matrix();
    let hi = h.kronecker(&DMatrix::<C64>::identity(2, 2));
    hi * cnot_matrix()
}

/// `U` targeted at two qubit sites; `hadamard_site` is the Hadamard /
/// CNOT-control site and supplies the phase bit on readout.
pub fn bsm_unitary(hadamard_site: &str, other_site: &str) -> GateOp {
    GateOp::new(bsm_matrix(), vec![hadamard_site, other_site])
        .expect("BSM matrix is unitary by construction")
}

/// The Bell projector selected when the disambiguated BSM circuit reads
/// `(b1, b2)`: the first bit is the phase bit, the second the flip bit.
pub fn bsm_outcome_map(bits: (u8, u8)) -> BellKind {
    BellKind::from_bits(bits.0, bits.1)
}

/// Single-qubit Pauli X.
pub fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// Single-qubit Pauli Z.
pub fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `X^x Z^z` as a 2×2 matrix.
pub fn pauli_frame_matrix(z: u8, x: u8) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::identity(2, 2);
    if z & 1 == 1 {
        m = pauli_z() * m;
    }
    if x & 1 == 1 {
        m = pauli_x() * m;
    }
    m
}

/// One uncorrected teleportation step.
///
/// The sender holds `source` and `sender_half` of a Φ⁺ pair whose other
/// half is `receiver_half`. After applying `gates` and reading `(z, x)`
/// from `readout` (z first), the receiver half holds `X^x Z^z` applied to
/// the source state. No correction is applied; the Pauli frame is the
/// caller's to track.
#[derive(Clone, Debug)]
pub struct TeleportFragment {
    pub gates: Vec<GateOp>,
    /// Readout sites in (phase bit, flip bit) order.
    pub readout: [String; 2],
    /// The site now carrying `X^x Z^z ·(source state)`.
    pub receiver: String,
}

pub fn uncorrected_teleport_fragment(
    source: &str,
    sender_half: &str,
    receiver_half: &str,
) -> Result<TeleportFragment> {
    let mut names = [source, sender_half, receiver_half];
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DuplicateSite(source.to_string()));
    }
    Ok(TeleportFragment {
        gates: vec![bsm_unitary(source, sender_half)],
        readout: [source.to_string(), sender_half.to_string()],
        receiver: receiver_half.to_string(),
    })
}

/// A measurement direction in the x–z plane of the Bloch sphere; the
/// measured observable is `z·σz + x·σx` with outcomes ±1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub z: f64,
    pub x: f64,
}

impl Direction {
    pub fn new(z: f64, x: f64) -> Result<Self> {
        let norm = (z * z + x * x).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Input(format!("direction ({z}, {x}) is not unit length")));
        }
        Ok(Direction { z, x })
    }

    /// Direction at angle θ from the z axis (θ=0 gives σz, θ=π/2 σx).
    pub fn from_angle(theta: f64) -> Self {
        Direction { z: theta.cos(), x: theta.sin() }
    }

    pub fn angle(&self) -> f64 {
        self.x.atan2(self.z)
    }

    /// Pre-rotation whose computational readout measures this direction:
    /// bit 0 is the +1 outcome, bit 1 the −1 outcome.
    pub fn measurement_rotation(&self) -> DMatrix<C64> {
        let t = self.angle() / 2.0;
        // R(θ)† with R(θ) mapping ∣0⟩ to the +1 eigenvector.
        DMatrix::from_row_slice(
            2,
            2,
            &[c(t.cos(), 0.0), c(t.sin(), 0.0), c(-t.sin(), 0.0), c(t.cos(), 0.0)],
        )
    }
}

/// A party's pair of measurement directions for a CHSH test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshSettings {
    pub first: Direction,
    pub second: Direction,
}

impl ChshSettings {
    pub fn direction(&self, setting: usize) -> Direction {
        if setting == 0 {
            self.first
        } else {
            self.second
        }
    }
}

/// A wing of the built-in scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wing {
    A,
    B,
    CA,
    CB,
}

impl Wing {
    pub fn parse(s: &str) -> Result<Wing> {
        match s {
            "A" => Ok(Wing::A),
            "B" => Ok(Wing::B),
            "C_A" | "CA" => Ok(Wing::CA),
            "C_B" | "CB" => Ok(Wing::CB),
            other => Err(Error::UnknownWing(other.to_string())),
        }
    }
}

/// Canonical direction assignment: σz/σx on the A and C_B wings, the
/// diagonal pair (σz±σx)/√2 on C_A and B. Chosen so that both self-test
/// wing pairs and the A–B pair of send rounds reach 2√2.
pub fn canonical_chsh_settings(wing: Wing) -> ChshSettings {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    match wing {
        Wing::A | Wing::CB => ChshSettings {
            first: Direction::from_angle(0.0),
            second: Direction::from_angle(FRAC_PI_2),
        },
        Wing::CA | Wing::B => ChshSettings {
            first: Direction::from_angle(FRAC_PI_4),
            second: Direction::from_angle(-FRAC_PI_4),
        },
    }
}

/// The four correlators E(x, y) of a 2×2-setting, ±1-outcome behavior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlators {
    pub e: [[f64; 2]; 2],
}

impl Correlators {
    /// Exact correlators of a two-qubit state under the given settings.
    pub fn of_state(
        state: &PureState,
        site_a: &str,
        site_b: &str,
        a: &ChshSettings,
        b: &ChshSettings,
    ) -> Result<Correlators> {
        let mut e = [[0.0; 2]; 2];
        for (xi, x) in [a.first, a.second].iter().enumerate() {
            for (yi, y) in [b.first, b.second].iter().enumerate() {
                let ra = GateOp::new(x.measurement_rotation(), vec![site_a])?;
                let rb = GateOp::new(y.measurement_rotation(), vec![site_b])?;
                let rotated = apply_gate(&apply_gate(state, &ra)?, &rb)?;
                let dist = born_distribution(&rotated, &[site_a, site_b])?;
                let mut corr = 0.0;
                for (key, p) in dist.iter() {
                    let sign = if (key[0] + key[1]) % 2 == 0 { 1.0 } else { -1.0 };
                    corr += sign * p;
                }
                e[xi][yi] = corr;
            }
        }
        Ok(Correlators { e })
    }
}

/// One of the eight CHSH symmetries: a sign vector over the four
/// correlators with an odd number of minus signs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChshSymmetry {
    pub signs: [i8; 4],
}

impl ChshSymmetry {
    pub fn score(&self, corr: &Correlators) -> f64 {
        self.signs[0] as f64 * corr.e[0][0]
            + self.signs[1] as f64 * corr.e[0][1]
            + self.signs[2] as f64 * corr.e[1][0]
            + self.signs[3] as f64 * corr.e[1][1]
    }
}

impl fmt::Display for ChshSymmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.signs {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// All eight CHSH symmetries, in a fixed enumeration order.
pub fn chsh_symmetries() -> Vec<ChshSymmetry> {
    let mut out = Vec::with_capacity(8);
    for mask in 0u8..16 {
        let signs: [i8; 4] = std::array::from_fn(|i| if mask >> i & 1 == 0 { 1 } else { -1 });
        let product: i8 = signs.iter().product();
        if product == -1 {
            out.push(ChshSymmetry { signs });
        }
    }
    out
}

/// All eight symmetry scores plus the maximizing symmetry.
#[derive(Clone, Debug)]
pub struct ChshScores {
    pub scores: Vec<(ChshSymmetry, f64)>,
    pub best: usize,
}

impl ChshScores {
    pub fn best_symmetry(&self) -> ChshSymmetry {
        self.scores[self.best].0
    }

    pub fn best_score(&self) -> f64 {
        self.scores[self.best].1
    }
}

pub fn chsh_scores(corr: &Correlators) -> ChshScores {
    let scores: Vec<(ChshSymmetry, f64)> = chsh_symmetries()
        .into_iter()
        .map(|s| (s, s.score(corr)))
        .collect();
    let best = scores
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    ChshScores { scores, best }
}
