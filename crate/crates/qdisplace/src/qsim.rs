//! Exact pure-state simulation over mixed-dimension registers.
//!
//! A [`Register`] is an ordered list of labeled sites, each with its own
//! dimension (2 for qubits, 4 for ququarts, ...). Basis indices use the
//! first site as the most significant digit: for a three-qubit register,
//! index 5 is ∣101⟩. All operations are exact: gates are applied by index
//! arithmetic over the target-site digits (never by building the full
//! register-sized matrix), and measurement statistics come straight from
//! the Born rule.
//!
//! States are immutable values; every operation returns a new state.

use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::fmt;

/// Unitarity / normalization tolerance.
pub const UNITARY_TOL: f64 = 1e-10;
/// Probabilities within this distance below zero are clamped to zero;
/// anything more negative is an error.
pub const PROB_CLAMP: f64 = 1e-12;
/// Distribution sums must match 1 within this tolerance.
pub const DIST_SUM_TOL: f64 = 1e-9;

/// Default dense cap: registers up to 2^26 amplitudes (~1 GiB of
/// complex doubles). Override with the `QDISPLACE_MAX_QUBITS` env var.
pub const DEFAULT_MAX_QUBITS: u32 = 26;

/// Dense-mode cap in qubit equivalents, honoring `QDISPLACE_MAX_QUBITS`.
pub fn dense_cap() -> u32 {
    std::env::var("QDISPLACE_MAX_QUBITS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

fn check_dense_cap(dim: usize) -> Result<()> {
    let cap = dense_cap();
    if (dim as u128) > (1u128 << cap) {
        return Err(Error::DenseCapExceeded { dim, cap });
    }
    Ok(())
}

/// One labeled tensor factor of a register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Site {
    pub label: String,
    pub dim: usize,
}

/// An ordered list of labeled sites. Total dimension is the product of
/// the site dimensions; the first site is the most significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    sites: Vec<Site>,
}

impl Register {
    pub fn new(sites: Vec<(impl Into<String>, usize)>) -> Result<Self> {
        let sites: Vec<Site> = sites
            .into_iter()
            .map(|(label, dim)| Site { label: label.into(), dim })
            .collect();
        for site in &sites {
            if site.dim < 2 {
                return Err(Error::BadDimension(site.dim));
            }
        }
        for (i, site) in sites.iter().enumerate() {
            if sites[..i].iter().any(|s| s.label == site.label) {
                return Err(Error::DuplicateSite(site.label.clone()));
            }
        }
        let reg = Register { sites };
        check_dense_cap(reg.dim())?;
        Ok(reg)
    }

    /// Convenience constructor for a register of qubits.
    pub fn qubits(labels: &[&str]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| (l, 2)).collect())
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn labels(&self) -> Vec<&str> {
        self.sites.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Total dimension (product of site dimensions).
    pub fn dim(&self) -> usize {
        self.sites.iter().map(|s| s.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.sites
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownSite(label.to_string()))
    }

    pub fn site_dim(&self, label: &str) -> Result<usize> {
        Ok(self.sites[self.position(label)?].dim)
    }

    /// Stride of each site: the index weight of one digit step.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.sites.len()];
        for i in (0..self.sites.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.sites[i + 1].dim;
        }
        strides
    }

    /// Digits of `index`, most significant site first.
    pub fn digits(&self, index: usize) -> Vec<usize> {
        let mut rem = index;
        self.strides()
            .iter()
            .map(|&s| {
                let d = rem / s;
                rem %= s;
                d
            })
            .collect()
    }

    /// Inverse of [`Register::digits`].
    pub fn index_of(&self, digits: &[usize]) -> usize {
        self.strides()
            .iter()
            .zip(digits)
            .map(|(s, d)| s * d)
            .sum()
    }
}

/// A unitary acting on an ordered subset of register sites.
#[derive(Clone, Debug)]
pub struct GateOp {
    matrix: DMatrix<C64>,
    targets: Vec<String>,
}

impl GateOp {
    /// Build a gate from a square matrix and its target sites. The matrix
    /// dimension must equal the product of the target-site dimensions
    /// (verified against the register at application time), and the
    /// matrix must be unitary within [`UNITARY_TOL`].
    pub fn new(matrix: DMatrix<C64>, targets: Vec<impl Into<String>>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::GateShape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected: matrix.nrows(),
            });
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(GateOp {
            matrix,
            targets: targets.into_iter().map(Into::into).collect(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The inverse gate on the same targets.
    pub fn dagger(&self) -> GateOp {
        GateOp {
            matrix: self.matrix.adjoint(),
            targets: self.targets.clone(),
        }
    }

    /// Same unitary, retargeted to different sites.
    pub fn on(&self, targets: Vec<impl Into<String>>) -> GateOp {
        GateOp {
            matrix: self.matrix.clone(),
            targets: targets.into_iter().map(Into::into).collect(),
        }
    }

    /// Expand into a controlled gate: the base unitary fires only when
    /// the control sites (all qubits) read exactly `pattern`; otherwise
    /// the identity acts. Controls are prepended to the target list.
    pub fn controlled(&self, controls: &[(String, u8)]) -> GateOp {
        let cdim = 1usize << controls.len();
        let gdim = self.dim();
        let dim = cdim * gdim;
        let mut m = DMatrix::<C64>::identity(dim, dim);
        let mut key = 0usize;
        for &(_, bit) in controls {
            key = (key << 1) | bit as usize;
        }
        let base = key * gdim;
        for r in 0..gdim {
            for c in 0..gdim {
                m[(base + r, base + c)] = self.matrix[(r, c)];
            }
        }
        let mut targets: Vec<String> = controls.iter().map(|(s, _)| s.clone()).collect();
        targets.extend(self.targets.iter().cloned());
        GateOp { matrix: m, targets }
    }
}

pub fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let prod = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let want = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((prod[(r, c)] - want).norm());
        }
    }
    dev
}

/// A normalized pure state over a register.
#[derive(Clone, Debug)]
pub struct PureState {
    register: Register,
    amps: Vec<C64>,
}

impl PureState {
    /// Build a state from explicit amplitudes, checking length and norm.
    pub fn from_amplitudes(register: Register, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != register.dim() {
            return Err(Error::AmplitudeLength { got: amps.len(), want: register.dim() });
        }
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n2 - 1.0).abs() > UNITARY_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(PureState { register, amps })
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨self∣other⟩ over identical registers.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.register != other.register {
            return Err(Error::RegisterMismatch(format!(
                "{:?} vs {:?}",
                self.register.labels(),
                other.register.labels()
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// The basis state ∣basis_index⟩ of the register.
pub fn init_state(register: &Register, basis_index: usize) -> Result<PureState> {
    let dim = register.dim();
    if basis_index >= dim {
        return Err(Error::IndexOutOfRange { index: basis_index, dim });
    }
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[basis_index] = C64::new(1.0, 0.0);
    Ok(PureState { register: register.clone(), amps })
}

/// Apply `gate` to the state: the gate acts on its target sites and the
/// identity acts everywhere else. Never materializes the full-register
/// matrix; cost is O(total dimension × gate dimension).
pub fn apply_gate(state: &PureState, gate: &GateOp) -> Result<PureState> {
    let reg = &state.register;
    let strides = reg.strides();

    let mut tpos = Vec::with_capacity(gate.targets().len());
    for label in gate.targets() {
        let p = reg.position(label)?;
        if tpos.contains(&p) {
            return Err(Error::DuplicateSite(label.clone()));
        }
        tpos.push(p);
    }
    let tdims: Vec<usize> = tpos.iter().map(|&p| reg.sites[p].dim).collect();
    let gdim: usize = tdims.iter().product();
    if gate.dim() != gdim {
        return Err(Error::GateShape { rows: gate.dim(), cols: gate.dim(), expected: gdim });
    }

    // Offset of each gate-basis index within the full register.
    let mut offsets = vec![0usize; gdim];
    for (g, offset) in offsets.iter_mut().enumerate() {
        let mut rem = g;
        for k in (0..tpos.len()).rev() {
            *offset += (rem % tdims[k]) * strides[tpos[k]];
            rem /= tdims[k];
        }
    }

    // Complement sites enumerate the base indices (target digits zero).
    let cpos: Vec<usize> = (0..reg.sites.len()).filter(|p| !tpos.contains(p)).collect();
    let cdims: Vec<usize> = cpos.iter().map(|&p| reg.sites[p].dim).collect();
    let ctotal: usize = cdims.iter().product();

    let m = gate.matrix();
    let mut out = state.amps.clone();
    let mut scratch = vec![C64::new(0.0, 0.0); gdim];
    for c in 0..ctotal {
        let mut base = 0usize;
        let mut rem = c;
        for k in (0..cpos.len()).rev() {
            base += (rem % cdims[k]) * strides[cpos[k]];
            rem /= cdims[k];
        }
        for (g, s) in scratch.iter_mut().enumerate() {
            *s = state.amps[base + offsets[g]];
        }
        for r in 0..gdim {
            let mut acc = C64::new(0.0, 0.0);
            for (g, s) in scratch.iter().enumerate() {
                acc += m[(r, g)] * s;
            }
            out[base + offsets[r]] = acc;
        }
    }
    Ok(PureState { register: reg.clone(), amps: out })
}

/// Tensor product. Site labels must be disjoint; `a`'s sites come first.
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState> {
    let mut sites = a.register.sites.clone();
    for site in &b.register.sites {
        if sites.iter().any(|s| s.label == site.label) {
            return Err(Error::DuplicateSite(site.label.clone()));
        }
        sites.push(site.clone());
    }
    let reg = Register { sites };
    check_dense_cap(reg.dim())?;
    let mut amps = Vec::with_capacity(a.amps.len() * b.amps.len());
    for &x in &a.amps {
        for &y in &b.amps {
            amps.push(x * y);
        }
    }
    Ok(PureState { register: reg, amps })
}

/// Exact marginal distribution of computational outcomes on `sites`
/// (outcome tuples ordered as listed).
pub fn born_distribution(state: &PureState, sites: &[&str]) -> Result<OutcomeDistribution> {
    let reg = &state.register;
    let pos: Vec<usize> = sites
        .iter()
        .map(|l| reg.position(l))
        .collect::<Result<_>>()?;
    let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (idx, amp) in state.amps.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let digits = reg.digits(idx);
        let key: Vec<usize> = pos.iter().map(|&p| digits[p]).collect();
        *map.entry(key).or_insert(0.0) += p;
    }
    OutcomeDistribution::new(map)
}

/// Project `site` onto `outcome`, drop it from the register, and
/// renormalize. Returns the branch probability and the post-state.
pub fn project_and_drop(state: &PureState, site: &str, outcome: usize) -> Result<(f64, PureState)> {
    let reg = &state.register;
    let pos = reg.position(site)?;
    let sdim = reg.sites[pos].dim;
    if outcome >= sdim {
        return Err(Error::IndexOutOfRange { index: outcome, dim: sdim });
    }
    let new_sites: Vec<Site> = reg
        .sites
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pos)
        .map(|(_, s)| s.clone())
        .collect();
    let new_reg = Register { sites: new_sites };
    let stride = reg.strides()[pos];
    let block = stride * sdim;
    let mut amps = vec![C64::new(0.0, 0.0); new_reg.dim()];
    let mut prob = 0.0;
    for (idx, &amp) in state.amps.iter().enumerate() {
        if (idx / stride) % sdim != outcome {
            continue;
        }
        prob += amp.norm_sqr();
        amps[(idx / block) * stride + idx % stride] = amp;
    }
    if prob <= PROB_CLAMP {
        return Err(Error::ZeroProbabilityBranch(prob));
    }
    let scale = C64::new(1.0 / prob.sqrt(), 0.0);
    for a in &mut amps {
        *a *= scale;
    }
    Ok((prob, PureState { register: new_reg, amps }))
}

/// True iff the states are equal up to a global phase within `tol`
/// (compares ∣⟨a∣b⟩∣ to 1). Registers must match.
pub fn states_equal(a: &PureState, b: &PureState, tol: f64) -> Result<bool> {
    let overlap = a.inner(b)?.norm();
    Ok((overlap - 1.0).abs() <= tol)
}

/// Reorder the register sites; amplitudes are permuted accordingly.
pub fn permute(state: &PureState, new_order: &[&str]) -> Result<PureState> {
    let reg = &state.register;
    if new_order.len() != reg.len() {
        return Err(Error::RegisterMismatch(format!(
            "permutation lists {} sites, register has {}",
            new_order.len(),
            reg.len()
        )));
    }
    let pos: Vec<usize> = new_order
        .iter()
        .map(|l| reg.position(l))
        .collect::<Result<_>>()?;
    {
        let mut seen = pos.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != pos.len() {
            return Err(Error::RegisterMismatch("permutation repeats a site".into()));
        }
    }
    let new_reg = Register {
        sites: pos.iter().map(|&p| reg.sites[p].clone()).collect(),
    };
    let mut amps = vec![C64::new(0.0, 0.0); new_reg.dim()];
    for (idx, &amp) in state.amps.iter().enumerate() {
        let digits = reg.digits(idx);
        let new_digits: Vec<usize> = pos.iter().map(|&p| digits[p]).collect();
        amps[new_reg.index_of(&new_digits)] = amp;
    }
    Ok(PureState { register: new_reg, amps })
}

/// An exact probability distribution over outcome tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    probs: BTreeMap<Vec<usize>, f64>,
}

impl OutcomeDistribution {
    /// Validate and clamp: probabilities within [`PROB_CLAMP`] below zero
    /// become zero, anything more negative is an error, and the total
    /// must be 1 within [`DIST_SUM_TOL`].
    pub fn new(mut probs: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        for p in probs.values_mut() {
            if *p < -PROB_CLAMP {
                return Err(Error::NegativeProbability(*p));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.values().sum();
        if (sum - 1.0).abs() > DIST_SUM_TOL {
            return Err(Error::BadDistributionSum(sum));
        }
        Ok(OutcomeDistribution { probs })
    }

    pub fn probability(&self, outcome: &[usize]) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.probs.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total-variation distance, over the union of outcome tuples.
    pub fn tv_distance(&self, other: &OutcomeDistribution) -> f64 {
        let mut keys: Vec<&Vec<usize>> = self.probs.keys().collect();
        keys.extend(other.probs.keys());
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|k| (self.probability(k) - other.probability(k)).abs())
            .sum::<f64>()
    }
}

impl fmt::Display for OutcomeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "{{")?;
        for (k, v) in &self.probs {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            let key: Vec<String> = k.iter().map(|d| d.to_string()).collect();
            write!(f, "{}: {:.6}", key.join(""), v)?;
        }
        write!(f, "}}")
    }
}
