//! Bell-state bookkeeping for heralded generation, mapping and swapping.
//!
//! Qubit levels map to bits as `↑ = 0`, `↓ = 1`. A Bell label is a pair of
//! Pauli bits `(x, z)` such that the pair state is `(I ⊗ XˣZᶻ)|φ⁺⟩` with
//! `|φ⁺⟩ = (|↑↑⟩ + |↓↓⟩)/√2`:
//!
//! | label | x | z |
//! |-------|---|---|
//! | φ⁺    | 0 | 0 |
//! | φ⁻    | 0 | 1 |
//! | ψ⁺    | 1 | 0 |
//! | ψ⁻    | 1 | 1 |
//!
//! A swap at a node measures the two local halves with a CNOT (control on
//! the Er side, flip when the control is `↓`), an X-basis Er readout `m1`, a
//! reverse CNOT and a Z-basis Er readout `m2`. The outer pair then carries
//!
//! ```text
//! x = x_L ⊕ x_R ⊕ m1 ⊕ m2,    z = z_L ⊕ z_R ⊕ m1
//! ```
//!
//! Mapping a heralded Er-Er pair into the Eu memories and reading out both Er
//! ions in the X basis gives `z ⊕= m1 ⊕ m2`. Both rules are checked against
//! [`statevector_oracle`] and [`mapping_oracle`].

use crate::lindblad::Spin;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("swap expects an X-basis then a Z-basis readout, got {0:?} then {1:?}")]
    MismatchedBases(Basis, Basis),
    #[error("frame endpoints must be distinct (node {0})")]
    DegenerateFrame(NodeId),
    #[error("frames do not form a connected chain: {0}")]
    DisconnectedChain(String),
    #[error("no pair of adjacent frames meets at node {0}")]
    UnknownJunction(NodeId),
    #[error("oracle supports at most {max} qubits, {requested} requested")]
    TooManyQubits { requested: usize, max: usize },
    #[error("oracle state is not a Bell state (largest overlap {0})")]
    NotBell(f64),
    #[error("forced measurement outcome has zero probability")]
    ImpossibleOutcome,
    #[error("swap junction {junction} outside 1..{links}")]
    BadJunction { junction: usize, links: usize },
    #[error("repeated swap at junction {0}")]
    RepeatedJunction(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => BellLabel::PhiPlus,
            (false, true) => BellLabel::PhiMinus,
            (true, false) => BellLabel::PsiPlus,
            (true, true) => BellLabel::PsiMinus,
        }
    }

    /// `(x, z)` Pauli bits.
    pub fn bits(self) -> (bool, bool) {
        match self {
            BellLabel::PhiPlus => (false, false),
            BellLabel::PhiMinus => (false, true),
            BellLabel::PsiPlus => (true, false),
            BellLabel::PsiMinus => (true, true),
        }
    }

    pub fn is_psi(self) -> bool {
        self.bits().0
    }

    /// Bitwise XOR of the Pauli bits.
    pub fn compose(self, other: BellLabel) -> BellLabel {
        let (a, b) = (self.bits(), other.bits());
        BellLabel::from_bits(a.0 ^ b.0, a.1 ^ b.1)
    }

    /// Pauli that takes this state to φ⁺ when applied to the second qubit.
    pub fn correction(self) -> Pauli {
        Pauli::from_bits(self.bits())
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "φ+",
            BellLabel::PhiMinus => "φ-",
            BellLabel::PsiPlus => "ψ+",
            BellLabel::PsiMinus => "ψ-",
        }
    }
}

impl std::fmt::Display for BellLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Single-qubit Pauli, up to phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits((x, z): (bool, bool)) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasurementRecord {
    pub node: NodeId,
    pub basis: Basis,
    pub outcome: Spin,
}

impl MeasurementRecord {
    pub fn new(node: NodeId, basis: Basis, outcome: Spin) -> Self {
        Self {
            node,
            basis,
            outcome,
        }
    }

    /// `↑ → false`, `↓ → true`.
    pub fn bit(&self) -> bool {
        self.outcome == Spin::Down
    }
}

pub fn spin_from_bit(bit: bool) -> Spin {
    if bit {
        Spin::Down
    } else {
        Spin::Up
    }
}

/// One correction record: Pauli byproduct attributed to the measuring node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correction {
    pub node: NodeId,
    pub pauli: Pauli,
}

/// Tracked state of one live entangled pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BellFrame {
    pub label: BellLabel,
    pub corrections: Vec<Correction>,
    pub endpoints: (NodeId, NodeId),
}

impl BellFrame {
    pub fn new(label: BellLabel, left: NodeId, right: NodeId) -> Result<Self, ProtocolError> {
        if left == right {
            return Err(ProtocolError::DegenerateFrame(left));
        }
        Ok(Self {
            label,
            corrections: Vec::new(),
            endpoints: (left, right),
        })
    }

    /// Correction to apply on the right endpoint to obtain φ⁺.
    pub fn pending_correction(&self) -> Correction {
        Correction {
            node: self.endpoints.1,
            pauli: self.label.correction(),
        }
    }

    /// Applies a mapping readout on both endpoints.
    pub fn mapped(mut self, m1: &MeasurementRecord, m2: &MeasurementRecord) -> Self {
        let z = m1.bit() ^ m2.bit();
        self.label = map_outcome(self.label, m1.bit(), m2.bit());
        if z {
            self.corrections.push(Correction {
                node: self.endpoints.1,
                pauli: Pauli::Z,
            });
        }
        self
    }
}

/// Detector click pattern of one heralding round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detection {
    None,
    D1,
    D2,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BkOutcome {
    pub success: bool,
    pub label: Option<BellLabel>,
}

/// Two-round heralding: success iff exactly one detector clicks in each
/// round; same detector twice heralds ψ⁺, different detectors ψ⁻.
pub fn bk_outcome(rounds: [Detection; 2]) -> BkOutcome {
    use Detection::{D1, D2};
    let label = match rounds {
        [D1, D1] | [D2, D2] => Some(BellLabel::PsiPlus),
        [D1, D2] | [D2, D1] => Some(BellLabel::PsiMinus),
        _ => None,
    };
    BkOutcome {
        success: label.is_some(),
        label,
    }
}

/// Loss model for the heralding station: each emitted photon reaches a
/// detector and clicks with probability `p·η_t·η_d`. Photons from the two
/// nodes are indistinguishable, so two photons in the same round bunch into
/// one output port; detectors do not resolve photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel {
    pub p_emit: f64,
    pub eta_t: f64,
    pub eta_d: f64,
}

impl DetectionModel {
    pub fn survival(&self) -> f64 {
        self.p_emit * self.eta_t * self.eta_d
    }

    fn round_patterns(&self, emitters: usize) -> Vec<(Detection, f64)> {
        let q = self.survival();
        let mut out = vec![(Detection::None, 0.0), (Detection::D1, 0.0), (Detection::D2, 0.0)];
        match emitters {
            0 => out[0].1 = 1.0,
            1 => {
                out[0].1 = 1.0 - q;
                out[1].1 = q / 2.0;
                out[2].1 = q / 2.0;
            }
            _ => {
                // At least one of two bunched photons arrives.
                let any = 1.0 - (1.0 - q) * (1.0 - q);
                out[0].1 = 1.0 - any;
                out[1].1 = any / 2.0;
                out[2].1 = any / 2.0;
            }
        }
        out
    }

    /// Every two-round pattern with its probability, starting from both
    /// qubits in `(|↑⟩+|↓⟩)/√2`. Round one excites `↑`, round two (after the
    /// π inversion) the original `↓`.
    pub fn patterns(&self) -> Vec<([Detection; 2], f64)> {
        let mut acc: Vec<([Detection; 2], f64)> = Vec::new();
        for a in 0..2usize {
            for b in 0..2usize {
                let first = (a == 0) as usize + (b == 0) as usize;
                let second = 2 - first;
                for (d1, p1) in self.round_patterns(first) {
                    for (d2, p2) in self.round_patterns(second) {
                        let w = 0.25 * p1 * p2;
                        match acc.iter_mut().find(|(k, _)| *k == [d1, d2]) {
                            Some(entry) => entry.1 += w,
                            None => acc.push(([d1, d2], w)),
                        }
                    }
                }
            }
        }
        acc
    }

    pub fn success_probability(&self) -> f64 {
        self.patterns()
            .into_iter()
            .filter(|(k, _)| bk_outcome(*k).success)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Byproduct label of a swap on φ⁺ ⊗ φ⁺ (equivalently ψ⁺ ⊗ ψ⁺) inputs.
/// `m1` must be the X-basis readout, `m2` the Z-basis readout.
pub fn swap_outcome(
    m1: &MeasurementRecord,
    m2: &MeasurementRecord,
) -> Result<BellLabel, ProtocolError> {
    if m1.basis != Basis::X || m2.basis != Basis::Z {
        return Err(ProtocolError::MismatchedBases(m1.basis, m2.basis));
    }
    let (a, b) = (m1.bit(), m2.bit());
    Ok(BellLabel::from_bits(a ^ b, a))
}

/// Outer-pair label after swapping `left` and `right`.
pub fn swap_labels(
    left: BellLabel,
    right: BellLabel,
    m1: &MeasurementRecord,
    m2: &MeasurementRecord,
) -> Result<BellLabel, ProtocolError> {
    Ok(left.compose(right).compose(swap_outcome(m1, m2)?))
}

/// Eu-Eu label after mapping an Er-Er pair and reading both Er ions in X.
pub fn map_outcome(label: BellLabel, m1: bool, m2: bool) -> BellLabel {
    let (x, z) = label.bits();
    BellLabel::from_bits(x, z ^ m1 ^ m2)
}

/// Readouts of one swap at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapResult {
    pub node: NodeId,
    pub m1: MeasurementRecord,
    pub m2: MeasurementRecord,
}

impl SwapResult {
    pub fn from_bits(node: NodeId, m1: bool, m2: bool) -> Self {
        Self {
            node,
            m1: MeasurementRecord::new(node, Basis::X, spin_from_bit(m1)),
            m2: MeasurementRecord::new(node, Basis::Z, spin_from_bit(m2)),
        }
    }
}

fn merge(left: BellFrame, right: BellFrame, swap: &SwapResult) -> Result<BellFrame, ProtocolError> {
    let byproduct = swap_outcome(&swap.m1, &swap.m2)?;
    let mut corrections = left.corrections;
    corrections.extend(right.corrections);
    corrections.push(Correction {
        node: swap.node,
        pauli: byproduct.correction(),
    });
    Ok(BellFrame {
        label: left.label.compose(right.label).compose(byproduct),
        corrections,
        endpoints: (left.endpoints.0, right.endpoints.1),
    })
}

/// Folds swap results (in any order) into the end-to-end frame.
pub fn propagate_frame(
    frames: &[BellFrame],
    swaps: &[SwapResult],
) -> Result<BellFrame, ProtocolError> {
    if frames.is_empty() {
        return Err(ProtocolError::DisconnectedChain("no frames".into()));
    }
    let mut segments: Vec<BellFrame> = frames.to_vec();
    for f in &segments {
        if f.endpoints.0 == f.endpoints.1 {
            return Err(ProtocolError::DegenerateFrame(f.endpoints.0));
        }
    }
    segments.sort_by_key(|f| f.endpoints.0);
    for pair in segments.windows(2) {
        if pair[0].endpoints.1 != pair[1].endpoints.0 {
            return Err(ProtocolError::DisconnectedChain(format!(
                "frame ending at {} followed by frame starting at {}",
                pair[0].endpoints.1, pair[1].endpoints.0
            )));
        }
    }
    for swap in swaps {
        let li = segments.iter().position(|f| f.endpoints.1 == swap.node);
        let ri = segments.iter().position(|f| f.endpoints.0 == swap.node);
        let (li, ri) = match (li, ri) {
            (Some(l), Some(r)) => (l, r),
            _ => return Err(ProtocolError::UnknownJunction(swap.node)),
        };
        // Segments stay sorted, so the right neighbour follows the left one.
        let right = segments.remove(ri);
        let left = segments.remove(li);
        segments.insert(li, merge(left, right, swap)?);
    }
    if segments.len() != 1 {
        return Err(ProtocolError::DisconnectedChain(format!(
            "{} segments remain after all swaps",
            segments.len()
        )));
    }
    Ok(segments.pop().expect("one segment"))
}

/// Text table of swap and mapping byproducts for every readout pair.
pub fn correction_table() -> String {
    let mut out = String::new();
    let _ = writeln!(out, "m1(X) m2(Z) | swap byproduct | Pauli | mapping z-flip");
    for m1 in [false, true] {
        for m2 in [false, true] {
            let swap = swap_outcome(
                &MeasurementRecord::new(0, Basis::X, spin_from_bit(m1)),
                &MeasurementRecord::new(0, Basis::Z, spin_from_bit(m2)),
            )
            .expect("bases are fixed");
            let _ = writeln!(
                out,
                "{:<5} {:<5} | {:<14} | {:<5} | {}",
                if m1 { "↓" } else { "↑" },
                if m2 { "↓" } else { "↑" },
                swap.symbol(),
                format!("{:?}", swap.correction()),
                (m1 ^ m2) as u8
            );
        }
    }
    out
}

/// Small real state-vector simulator (all gates used here are real).
struct Register {
    n: usize,
    amps: Vec<f64>,
}

impl Register {
    const MAX_QUBITS: usize = 8;

    fn mask(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    fn bell_chain(labels: &[BellLabel]) -> Result<Self, ProtocolError> {
        let n = 2 * labels.len();
        if n > Self::MAX_QUBITS {
            return Err(ProtocolError::TooManyQubits {
                requested: n,
                max: Self::MAX_QUBITS,
            });
        }
        let mut amps = vec![1.0];
        for l in labels {
            let pair = bell_vector(*l);
            amps = amps
                .iter()
                .flat_map(|a| pair.iter().map(move |b| a * b))
                .collect();
        }
        Ok(Self { n, amps })
    }

    fn cnot(&mut self, control: usize, target: usize) {
        let (c, t) = (self.mask(control), self.mask(target));
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    fn hadamard(&mut self, q: usize) {
        let m = self.mask(q);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (a, b) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = h * (a + b);
                self.amps[i | m] = h * (a - b);
            }
        }
    }

    /// Projects qubit `q` onto the Z eigenstate `bit` and renormalizes.
    fn project(&mut self, q: usize, bit: bool) -> Result<(), ProtocolError> {
        let m = self.mask(q);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & m != 0) != bit {
                *a = 0.0;
            }
        }
        let norm = self.amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(ProtocolError::ImpossibleOutcome);
        }
        self.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(())
    }

    fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Amplitudes of qubits `(a, b)`, assuming every other qubit has been
    /// projected onto a Z eigenstate.
    fn pair(&self, a: usize, b: usize) -> [f64; 4] {
        let (ma, mb) = (self.mask(a), self.mask(b));
        let base = self
            .amps
            .iter()
            .position(|x| x.abs() > 1e-12)
            .expect("normalized state")
            & !(ma | mb);
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            let mut i = base;
            if k & 2 != 0 {
                i |= ma;
            }
            if k & 1 != 0 {
                i |= mb;
            }
            *slot = self.amps[i];
        }
        v
    }
}

/// `(I ⊗ XˣZᶻ)|φ⁺⟩` in the basis `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩`.
pub fn bell_vector(label: BellLabel) -> [f64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match label {
        BellLabel::PhiPlus => [h, 0.0, 0.0, h],
        BellLabel::PhiMinus => [h, 0.0, 0.0, -h],
        BellLabel::PsiPlus => [0.0, h, h, 0.0],
        BellLabel::PsiMinus => [0.0, -h, h, 0.0],
    }
}

fn identify(v: &[f64; 4]) -> Result<BellLabel, ProtocolError> {
    let mut best = (0.0, BellLabel::PhiPlus);
    for l in BellLabel::ALL {
        let o: f64 = bell_vector(l).iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs();
        if o > best.0 {
            best = (o, l);
        }
    }
    if (best.0 - 1.0).abs() > 1e-9 {
        return Err(ProtocolError::NotBell(best.0));
    }
    Ok(best.1)
}

/// Which local half takes the Er role (CNOT control, measured) in a swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErSide {
    Left,
    Right,
}

/// Swap instruction for the oracle: junction `j` sits between links `j−1`
/// and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSwap {
    pub junction: usize,
    pub m1: bool,
    pub m2: bool,
}

/// Builds the explicit chain state, performs the swap circuits with forced
/// readouts in the given order and identifies the end-to-end Bell state.
pub fn statevector_oracle(
    links: &[BellLabel],
    swaps: &[OracleSwap],
    er_side: ErSide,
) -> Result<BellLabel, ProtocolError> {
    let mut reg = Register::bell_chain(links)?;
    let mut used = vec![false; links.len()];
    for s in swaps {
        if s.junction == 0 || s.junction >= links.len() {
            return Err(ProtocolError::BadJunction {
                junction: s.junction,
                links: links.len(),
            });
        }
        if std::mem::replace(&mut used[s.junction], true) {
            return Err(ProtocolError::RepeatedJunction(s.junction));
        }
        let (left_half, right_half) = (2 * s.junction - 1, 2 * s.junction);
        let (er, eu) = match er_side {
            ErSide::Right => (right_half, left_half),
            ErSide::Left => (left_half, right_half),
        };
        reg.cnot(er, eu);
        reg.hadamard(er);
        reg.project(er, s.m1)?;
        // Er stays in |m1⟩ and picks up Eu's value.
        reg.cnot(eu, er);
        reg.project(er, s.m2)?;
    }
    if used.iter().skip(1).any(|u| !u) {
        return Err(ProtocolError::DisconnectedChain(
            "oracle chain has unswapped junctions".into(),
        ));
    }
    debug_assert!((reg.norm() - 1.0).abs() < 1e-12);
    identify(&reg.pair(0, reg.n - 1))
}

/// Mapping step on an Er-Er pair: both Eu memories start in `↑`, each Er is
/// copied onto its Eu by the state-transfer gate, then both Er ions are read
/// out in the X basis with outcomes `m1`, `m2`. Returns the Eu-Eu label.
pub fn mapping_oracle(label: BellLabel, m1: bool, m2: bool) -> Result<BellLabel, ProtocolError> {
    // Qubits: Er1, Er2, Eu1, Eu2.
    let pair = bell_vector(label);
    let mut amps = vec![0.0; 16];
    for (k, a) in pair.iter().enumerate() {
        amps[k << 2] = *a;
    }
    let mut reg = Register { n: 4, amps };
    reg.cnot(0, 2);
    reg.cnot(1, 3);
    for (q, m) in [(0, m1), (1, m2)] {
        reg.hadamard(q);
        reg.project(q, m)?;
    }
    identify(&reg.pair(2, 3))
}

/// Norm of the initial oracle state for a chain (exposed for checks).
pub fn oracle_chain_norm(links: &[BellLabel]) -> Result<f64, ProtocolError> {
    Ok(Register::bell_chain(links)?.norm())
}
