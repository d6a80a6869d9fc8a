//! Nine-level open-system model of an Er-Eu pair.
//!
//! Each ion is a three-level system `{↑, ↓, e}`; the joint basis is
//! `{↑,↓,e}_Er ⊗ {↑,↓,e}_Eu`, indexed `3·er + eu`. During a square pulse the
//! Hamiltonian (rotating frame, rad/s) is
//!
//! ```text
//! H = Δν |e e⟩⟨e e| + (Ω/2)(σ⁺ + σ⁻)        on the driven transition
//! ```
//!
//! and the dissipator contains, for each ion k and ground level l,
//! `γ_{k,l} D(σ⁻_{k,l})`, `(γ*_k/2) D(σ⁺_{k,l}σ⁻_{k,l})` and
//! `χ_k D(σ_{z,k})` with `σ_{z,k} = (|↑⟩⟨↑| − |↓⟩⟨↓|)/2` and
//! `D(c)ρ = cρc† − {c†c, ρ}/2`.
//!
//! Two propagation routes are provided:
//!
//! * [`evolve_exact`] integrates the master equation on the 9×9 density
//!   matrix with an adaptive Dormand–Prince 5(4) scheme.
//! * [`rotation_superop`] builds the 81×81 first-order rotation superoperator
//!   `e^{L₀T}[1 + ∫₀ᵀ e^{−L₀τ} L₁ e^{L₀τ} dτ]`, the integral evaluated by
//!   Gauss–Legendre quadrature.
//!
//! Superoperators act on row-major vectorized states: `vec(ρ)[9i + j] = ρᵢⱼ`.

use nalgebra::{DMatrix, DVector, SMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
/// Operator on the nine-dimensional pair space.
pub type Op = SMatrix<C64, 9, 9>;
/// Superoperator on vectorized states (81×81).
pub type Superop = DMatrix<C64>;

pub const DIM: usize = 9;
pub const SUPER_DIM: usize = DIM * DIM;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_SLACK: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LindbladError {
    #[error("density matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0}, expected 1")]
    Trace(f64),
    #[error("density matrix has eigenvalue {0:e} below the positivity slack")]
    NotPositive(f64),
    #[error("{0} simultaneous drives requested; a pulse drives exactly one transition")]
    MultipleDrives(usize),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("negative or non-finite dissipation rate `{0}`")]
    InvalidRate(&'static str),
    #[error("negative dipole coupling {0}")]
    InvalidCoupling(f64),
    #[error("adaptive step size collapsed in pulse {pulse_index} at t = {time:e} s")]
    StepSize { pulse_index: usize, time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ion {
    Er,
    Eu,
}

impl Ion {
    pub fn other(self) -> Ion {
        match self {
            Ion::Er => Ion::Eu,
            Ion::Eu => Ion::Er,
        }
    }
}

/// Qubit (ground) level of one ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// Level index of the optically excited state within one ion.
pub const EXCITED: usize = 2;

/// Joint-basis index of (Er level, Eu level), each in `0..3`.
#[inline]
pub fn basis_index(er: usize, eu: usize) -> usize {
    3 * er + eu
}

fn single_level_op(ion: Ion, row: usize, col: usize) -> Op {
    let mut op = Op::zeros();
    for spectator in 0..3 {
        let (r, c) = match ion {
            Ion::Er => (basis_index(row, spectator), basis_index(col, spectator)),
            Ion::Eu => (basis_index(spectator, row), basis_index(spectator, col)),
        };
        op[(r, c)] = C64::new(1.0, 0.0);
    }
    op
}

/// `σ⁺_{k,l} = |e⟩⟨l|_k` embedded in the pair space.
pub fn raising(ion: Ion, spin: Spin) -> Op {
    single_level_op(ion, EXCITED, spin.index())
}

/// `σ_{z,k} = (|↑⟩⟨↑| − |↓⟩⟨↓|)/2`.
pub fn sigma_z(ion: Ion) -> Op {
    (single_level_op(ion, 0, 0) - single_level_op(ion, 1, 1)) * C64::new(0.5, 0.0)
}

/// Projector onto the excited level of one ion.
pub fn excited_projector(ion: Ion) -> Op {
    single_level_op(ion, EXCITED, EXCITED)
}

/// A valid density operator on the pair space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    matrix: Op,
}

impl DensityState {
    /// Validates Hermiticity (1e-10), unit trace (1e-10) and positivity
    /// (eigenvalues ≥ −1e-8).
    pub fn new(matrix: Op) -> Result<Self, LindbladError> {
        let state = Self { matrix };
        state.validate()?;
        Ok(state)
    }

    /// Wraps a matrix without validation (for intermediate results).
    pub fn from_matrix_unchecked(matrix: Op) -> Self {
        Self { matrix }
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn from_pure(amplitudes: &[C64; DIM]) -> Result<Self, LindbladError> {
        let psi = SMatrix::<C64, 9, 1>::from_column_slice(amplitudes);
        Self::new(psi * psi.adjoint())
    }

    /// Product state of an Er and an Eu qubit, each given as (↑, ↓) amplitudes.
    pub fn product(er: [C64; 2], eu: [C64; 2]) -> Result<Self, LindbladError> {
        let mut amps = [C64::new(0.0, 0.0); DIM];
        for (i, a) in er.iter().enumerate() {
            for (j, b) in eu.iter().enumerate() {
                amps[basis_index(i, j)] = a * b;
            }
        }
        Self::from_pure(&amps)
    }

    /// Computational basis state.
    pub fn basis(er: usize, eu: usize) -> Self {
        let mut m = Op::zeros();
        let k = basis_index(er, eu);
        m[(k, k)] = C64::new(1.0, 0.0);
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &Op {
        &self.matrix
    }

    pub fn into_matrix(self) -> Op {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        let herm = self.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(LindbladError::NotHermitian(herm));
        }
        let tr = self.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(LindbladError::Trace(tr.re));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_SLACK {
            return Err(LindbladError::NotPositive(min));
        }
        Ok(())
    }

    /// Population of the joint basis state `(er, eu)`.
    pub fn population(&self, er: usize, eu: usize) -> f64 {
        let k = basis_index(er, eu);
        self.matrix[(k, k)].re
    }

    /// Total population with at least one ion in its excited level.
    pub fn excited_population(&self) -> f64 {
        (0..DIM)
            .filter(|k| k / 3 == EXCITED || k % 3 == EXCITED)
            .map(|k| self.matrix[(k, k)].re)
            .sum()
    }

    /// `|⟨ψ|ρ|ψ⟩|` for a (not necessarily normalized) vector ψ.
    pub fn overlap(&self, psi: &[C64; DIM]) -> f64 {
        let v = SMatrix::<C64, 9, 1>::from_column_slice(psi);
        (v.adjoint() * self.matrix * v)[(0, 0)].norm()
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityState) -> f64 {
        let diff = self.matrix - other.matrix;
        let herm = (diff + diff.adjoint()) * C64::new(0.5, 0.0);
        0.5 * SymmetricEigen::new(herm).eigenvalues.iter().map(|x| x.abs()).sum::<f64>()
    }
}

/// Dissipation rates, all in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationRates {
    pub gamma_er_up: f64,
    pub gamma_er_down: f64,
    pub gamma_eu_up: f64,
    pub gamma_eu_down: f64,
    pub gamma_star_er: f64,
    pub gamma_star_eu: f64,
    pub chi_er: f64,
    pub chi_eu: f64,
}

impl DissipationRates {
    pub fn zero() -> Self {
        Self {
            gamma_er_up: 0.0,
            gamma_er_down: 0.0,
            gamma_eu_up: 0.0,
            gamma_eu_down: 0.0,
            gamma_star_er: 0.0,
            gamma_star_eu: 0.0,
            chi_er: 0.0,
            chi_eu: 0.0,
        }
    }

    /// Er³⁺/Eu³⁺:Y₂SiO₅ estimates. Optical decay returns to the driven (↑)
    /// ground level.
    pub fn nominal() -> Self {
        let w = crate::angular;
        Self {
            gamma_er_up: w(3.0),
            gamma_er_down: 0.0,
            gamma_eu_up: w(1.3),
            gamma_eu_down: 0.0,
            gamma_star_er: w(8.0),
            gamma_star_eu: w(19.0),
            chi_er: w(80.0),
            chi_eu: 0.0,
        }
    }

    /// γ_k = γ_{k↑} + γ_{k↓}.
    pub fn gamma_total(&self, ion: Ion) -> f64 {
        match ion {
            Ion::Er => self.gamma_er_up + self.gamma_er_down,
            Ion::Eu => self.gamma_eu_up + self.gamma_eu_down,
        }
    }

    pub fn gamma_star(&self, ion: Ion) -> f64 {
        match ion {
            Ion::Er => self.gamma_star_er,
            Ion::Eu => self.gamma_star_eu,
        }
    }

    pub fn chi(&self, ion: Ion) -> f64 {
        match ion {
            Ion::Er => self.chi_er,
            Ion::Eu => self.chi_eu,
        }
    }

    fn gamma(&self, ion: Ion, spin: Spin) -> f64 {
        match (ion, spin) {
            (Ion::Er, Spin::Up) => self.gamma_er_up,
            (Ion::Er, Spin::Down) => self.gamma_er_down,
            (Ion::Eu, Spin::Up) => self.gamma_eu_up,
            (Ion::Eu, Spin::Down) => self.gamma_eu_down,
        }
    }

    /// Exchanges the Er and Eu rates.
    pub fn swapped(&self) -> Self {
        Self {
            gamma_er_up: self.gamma_eu_up,
            gamma_er_down: self.gamma_eu_down,
            gamma_eu_up: self.gamma_er_up,
            gamma_eu_down: self.gamma_er_down,
            gamma_star_er: self.gamma_star_eu,
            gamma_star_eu: self.gamma_star_er,
            chi_er: self.chi_eu,
            chi_eu: self.chi_er,
        }
    }

    /// Scales optical decay, optical dephasing and spin decoherence
    /// independently.
    pub fn scaled(&self, decay: f64, dephasing: f64, spin: f64) -> Self {
        Self {
            gamma_er_up: self.gamma_er_up * decay,
            gamma_er_down: self.gamma_er_down * decay,
            gamma_eu_up: self.gamma_eu_up * decay,
            gamma_eu_down: self.gamma_eu_down * decay,
            gamma_star_er: self.gamma_star_er * dephasing,
            gamma_star_eu: self.gamma_star_eu * dephasing,
            chi_er: self.chi_er * spin,
            chi_eu: self.chi_eu * spin,
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.fields().iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("gamma_er_up", self.gamma_er_up),
            ("gamma_er_down", self.gamma_er_down),
            ("gamma_eu_up", self.gamma_eu_up),
            ("gamma_eu_down", self.gamma_eu_down),
            ("gamma_star_er", self.gamma_star_er),
            ("gamma_star_eu", self.gamma_star_eu),
            ("chi_er", self.chi_er),
            ("chi_eu", self.chi_eu),
        ]
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        for (name, v) in self.fields() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LindbladError::InvalidRate(name));
            }
        }
        Ok(())
    }

    /// Jump operators with their coefficients: `Σ rate · D(op)`.
    pub fn jump_operators(&self) -> Vec<(f64, Op)> {
        let mut jumps = Vec::with_capacity(8);
        for ion in [Ion::Er, Ion::Eu] {
            for spin in [Spin::Up, Spin::Down] {
                let g = self.gamma(ion, spin);
                if g > 0.0 {
                    jumps.push((g, raising(ion, spin).adjoint()));
                }
            }
            // Σ_l (γ*_k/2) D(σ⁺_{k,l}σ⁻_{k,l}); both terms share |e⟩⟨e|_k.
            let gs = self.gamma_star(ion);
            if gs > 0.0 {
                jumps.push((gs, excited_projector(ion)));
            }
            let chi = self.chi(ion);
            if chi > 0.0 {
                jumps.push((chi, sigma_z(ion)));
            }
        }
        jumps
    }
}

impl Default for DissipationRates {
    fn default() -> Self {
        Self::nominal()
    }
}

/// One square pulse driving the `l ↔ e` transition of ion `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub target_ion: Ion,
    pub target_spin: Spin,
    /// Rotation angle on resonance, rad.
    pub theta: f64,
    /// Angular Rabi frequency Ω, rad/s.
    pub rabi: f64,
}

impl PulseSpec {
    pub fn new(target_ion: Ion, target_spin: Spin, theta: f64, rabi: f64) -> Self {
        Self {
            target_ion,
            target_spin,
            theta,
            rabi,
        }
    }

    pub fn duration(&self) -> f64 {
        self.theta / self.rabi
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        if !(self.rabi > 0.0 && self.rabi.is_finite()) {
            return Err(LindbladError::InvalidPulse(format!("rabi = {}", self.rabi)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(LindbladError::InvalidPulse(format!("theta = {}", self.theta)));
        }
        Ok(())
    }
}

/// Pulse Hamiltonian for at most one drive, rad/s.
pub fn hamiltonian(drives: &[PulseSpec], coupling: f64) -> Result<Op, LindbladError> {
    if drives.len() > 1 {
        return Err(LindbladError::MultipleDrives(drives.len()));
    }
    if !(coupling >= 0.0 && coupling.is_finite()) {
        return Err(LindbladError::InvalidCoupling(coupling));
    }
    let mut h = Op::zeros();
    let ee = basis_index(EXCITED, EXCITED);
    h[(ee, ee)] = C64::new(coupling, 0.0);
    for pulse in drives {
        pulse.validate()?;
        let sp = raising(pulse.target_ion, pulse.target_spin);
        h += (sp + sp.adjoint()) * C64::new(pulse.rabi / 2.0, 0.0);
    }
    Ok(h)
}

fn identity_op() -> Op {
    Op::identity()
}

fn to_dmatrix(op: &Op) -> DMatrix<C64> {
    DMatrix::from_fn(DIM, DIM, |i, j| op[(i, j)])
}

/// Superoperator of `ρ ↦ AρB`.
fn sandwich(a: &Op, b: &Op) -> Superop {
    to_dmatrix(a).kronecker(&to_dmatrix(&b.transpose()))
}

/// Superoperator of `ρ ↦ −i[H, ρ]`.
pub fn commutator_superop(h: &Op) -> Superop {
    let id = identity_op();
    (sandwich(h, &id) - sandwich(&id, h)) * C64::new(0.0, -1.0)
}

/// Superoperator of `D(c)`.
pub fn dissipator_superop(c: &Op) -> Superop {
    let id = identity_op();
    let cdc = c.adjoint() * c;
    sandwich(c, &c.adjoint()) - (sandwich(&cdc, &id) + sandwich(&id, &cdc)) * C64::new(0.5, 0.0)
}

/// Reversible and dissipative parts of the generator for one pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub l0: Superop,
    pub l1: Superop,
}

impl Liouvillian {
    pub fn full(&self) -> Superop {
        &self.l0 + &self.l1
    }
}

/// Builds `L₀ρ = −i[H,ρ]` and `L₁ = L − L₀` for the given drive(s).
pub fn build_liouvillian(
    drives: &[PulseSpec],
    coupling: f64,
    rates: &DissipationRates,
) -> Result<Liouvillian, LindbladError> {
    rates.validate()?;
    let h = hamiltonian(drives, coupling)?;
    let l0 = commutator_superop(&h);
    let mut l1 = Superop::zeros(SUPER_DIM, SUPER_DIM);
    for (rate, c) in rates.jump_operators() {
        l1 += dissipator_superop(&c) * C64::new(rate, 0.0);
    }
    Ok(Liouvillian { l0, l1 })
}

/// Row-major vectorization.
pub fn vectorize(rho: &Op) -> DVector<C64> {
    DVector::from_fn(SUPER_DIM, |k, _| rho[(k / DIM, k % DIM)])
}

pub fn unvectorize(v: &DVector<C64>) -> Op {
    Op::from_fn(|i, j| v[DIM * i + j])
}

/// Applies a superoperator to a state.
pub fn apply_superop(superop: &Superop, rho: &DensityState) -> DensityState {
    DensityState::from_matrix_unchecked(unvectorize(&(superop * vectorize(rho.matrix()))))
}

/// `e^{−iHt}`.
pub fn propagator(h: &Op, t: f64) -> Op {
    (h * C64::new(0.0, -t)).exp()
}

/// Superoperator of `ρ ↦ UρU†`.
pub fn unitary_superop(u: &Op) -> Superop {
    to_dmatrix(u).kronecker(&to_dmatrix(&u.conjugate()))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

/// Knobs for the first-order rotation superoperator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeOptions {
    pub quadrature_nodes: usize,
    /// Warn when max rate / min(Ω, Δν) exceeds this.
    pub ratio_threshold: f64,
}

impl Default for PerturbativeOptions {
    fn default() -> Self {
        Self {
            quadrature_nodes: 32,
            ratio_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RotationSuperop {
    pub superop: Superop,
    /// max rate / min(Ω, Δν); the expansion assumes this is small.
    pub dissipation_ratio: f64,
}

impl RotationSuperop {
    pub fn is_perturbative(&self, threshold: f64) -> bool {
        self.dissipation_ratio <= threshold
    }
}

/// First-order rotation superoperator for one pulse.
pub fn rotation_superop(
    pulse: &PulseSpec,
    coupling: f64,
    rates: &DissipationRates,
    opts: &PerturbativeOptions,
) -> Result<RotationSuperop, LindbladError> {
    rates.validate()?;
    let h = hamiltonian(std::slice::from_ref(pulse), coupling)?;
    let duration = pulse.duration();

    let scale = if coupling > 0.0 {
        pulse.rabi.min(coupling)
    } else {
        pulse.rabi
    };
    let dissipation_ratio = rates.max_rate() / scale;
    if dissipation_ratio > opts.ratio_threshold {
        log::warn!(
            "dissipation ratio {dissipation_ratio:.2e} exceeds {:.1e}; first-order rotation may be inaccurate",
            opts.ratio_threshold
        );
    }

    let full = unitary_superop(&propagator(&h, duration));
    let jumps = rates.jump_operators();
    if jumps.is_empty() {
        return Ok(RotationSuperop {
            superop: full,
            dissipation_ratio,
        });
    }
    let mut l1 = Superop::zeros(SUPER_DIM, SUPER_DIM);
    for (rate, c) in &jumps {
        l1 += dissipator_superop(c) * C64::new(*rate, 0.0);
    }

    let mut integral = Superop::zeros(SUPER_DIM, SUPER_DIM);
    for (x, w) in gauss_legendre(opts.quadrature_nodes) {
        let tau = 0.5 * duration * (x + 1.0);
        let u = propagator(&h, tau);
        let forward = unitary_superop(&u);
        let backward = unitary_superop(&u.adjoint());
        integral += (backward * &l1 * forward) * C64::new(0.5 * duration * w, 0.0);
    }
    let mut correction = Superop::identity(SUPER_DIM, SUPER_DIM);
    correction += integral;
    Ok(RotationSuperop {
        superop: full * correction,
        dissipation_ratio,
    })
}

/// Applies a pulse sequence (first pulse first) with first-order rotation
/// superoperators.
pub fn evolve_perturbative(
    rho0: &DensityState,
    sequence: &[PulseSpec],
    coupling: f64,
    rates: &DissipationRates,
    opts: &PerturbativeOptions,
) -> Result<DensityState, LindbladError> {
    let mut v = vectorize(rho0.matrix());
    for pulse in sequence {
        let r = rotation_superop(pulse, coupling, rates, opts)?;
        v = &r.superop * v;
    }
    Ok(DensityState::from_matrix_unchecked(unvectorize(&v)))
}

/// Tolerances for [`evolve_exact`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

/// Sparse operator as (row, col, value) triples.
#[derive(Debug, Clone)]
struct Sparse(Vec<(usize, usize, C64)>);

impl Sparse {
    fn from_op(op: &Op) -> Self {
        let mut entries = Vec::new();
        for i in 0..DIM {
            for j in 0..DIM {
                let v = op[(i, j)];
                if v.norm() > 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Sparse(entries)
    }
}

/// Right-hand side of the master equation in 9×9 form.
struct MasterEquation {
    hamiltonian: Sparse,
    jumps: Vec<(f64, Sparse, Sparse)>,
}

impl MasterEquation {
    fn new(h: &Op, rates: &DissipationRates) -> Self {
        let jumps = rates
            .jump_operators()
            .into_iter()
            .map(|(rate, c)| (rate, Sparse::from_op(&c), Sparse::from_op(&(c.adjoint() * c))))
            .collect();
        Self {
            hamiltonian: Sparse::from_op(h),
            jumps,
        }
    }

    fn rhs(&self, rho: &Op, out: &mut Op) {
        out.fill(C64::new(0.0, 0.0));
        let minus_i = C64::new(0.0, -1.0);
        for &(a, b, h) in &self.hamiltonian.0 {
            let hh = minus_i * h;
            for j in 0..DIM {
                // −i Hρ
                out[(a, j)] += hh * rho[(b, j)];
                // +i ρH
                out[(j, b)] -= hh * rho[(j, a)];
            }
        }
        for (rate, c, cdc) in &self.jumps {
            let r = C64::new(*rate, 0.0);
            for &(a, b, x) in &c.0 {
                for &(cc, d, y) in &c.0 {
                    out[(a, cc)] += r * x * rho[(b, d)] * y.conj();
                }
            }
            let half = C64::new(0.5 * rate, 0.0);
            for &(a, b, x) in &cdc.0 {
                for j in 0..DIM {
                    out[(a, j)] -= half * x * rho[(b, j)];
                    out[(j, b)] -= half * rho[(j, a)] * x;
                }
            }
        }
    }
}

// Dormand–Prince 5(4) tableau. The generator is time independent within a
// pulse, so the nodes c_i are not needed.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn integrate_pulse(
    eq: &MasterEquation,
    rho: &mut Op,
    duration: f64,
    opts: &ExactOptions,
    pulse_index: usize,
) -> Result<(), LindbladError> {
    let mut t = 0.0;
    let mut h = duration / 64.0;
    let mut k = [Op::zeros(); 7];
    eq.rhs(rho, &mut k[0]);
    let mut steps = 0usize;
    while t < duration {
        if steps >= opts.max_steps || h < duration * 1e-14 {
            return Err(LindbladError::StepSize { pulse_index, time: t });
        }
        steps += 1;
        let last = t + h >= duration;
        let step = if last { duration - t } else { h };
        for s in 1..7 {
            let mut stage = *rho;
            for (j, a) in DP_A[s].iter().enumerate().take(s) {
                if *a != 0.0 {
                    stage += k[j] * C64::new(step * a, 0.0);
                }
            }
            eq.rhs(&stage, &mut k[s]);
        }
        let mut y5 = *rho;
        let mut err = Op::zeros();
        for s in 0..7 {
            if DP_B5[s] != 0.0 {
                y5 += k[s] * C64::new(step * DP_B5[s], 0.0);
            }
            err += k[s] * C64::new(step * (DP_B5[s] - DP_B4[s]), 0.0);
        }
        let mut ratio: f64 = 0.0;
        for i in 0..DIM {
            for j in 0..DIM {
                let scale = opts.atol + opts.rtol * rho[(i, j)].norm().max(y5[(i, j)].norm());
                ratio = ratio.max(err[(i, j)].norm() / scale);
            }
        }
        if ratio <= 1.0 {
            t = if last { duration } else { t + step };
            *rho = y5;
            // FSAL: the last stage is the derivative at the new point.
            k[0] = k[6];
        }
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = step * factor;
    }
    Ok(())
}

/// Integrates the full master equation through back-to-back square pulses
/// (first pulse first).
pub fn evolve_exact(
    rho0: &DensityState,
    sequence: &[PulseSpec],
    coupling: f64,
    rates: &DissipationRates,
    opts: &ExactOptions,
) -> Result<DensityState, LindbladError> {
    rates.validate()?;
    let mut rho = *rho0.matrix();
    for (pulse_index, pulse) in sequence.iter().enumerate() {
        let h = hamiltonian(std::slice::from_ref(pulse), coupling)?;
        let eq = MasterEquation::new(&h, rates);
        integrate_pulse(&eq, &mut rho, pulse.duration(), opts, pulse_index)?;
    }
    Ok(DensityState::from_matrix_unchecked(rho))
}

/// Like [`evolve_exact`] but returns the state after every pulse.
pub fn evolve_exact_trajectory(
    rho0: &DensityState,
    sequence: &[PulseSpec],
    coupling: f64,
    rates: &DissipationRates,
    opts: &ExactOptions,
) -> Result<Vec<DensityState>, LindbladError> {
    rates.validate()?;
    let mut rho = *rho0.matrix();
    let mut out = Vec::with_capacity(sequence.len());
    for (pulse_index, pulse) in sequence.iter().enumerate() {
        let h = hamiltonian(std::slice::from_ref(pulse), coupling)?;
        let eq = MasterEquation::new(&h, rates);
        integrate_pulse(&eq, &mut rho, pulse.duration(), opts, pulse_index)?;
        out.push(DensityState::from_matrix_unchecked(rho));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const DNU: f64 = 2.0 * PI * 46e3;

    fn omega() -> f64 {
        DNU / 3f64.sqrt()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_state(rng: &mut ChaCha8Rng) -> DensityState {
        // Mixture of three random pure qubit-subspace states.
        let mut m = Op::zeros();
        let mut total = 0.0;
        for _ in 0..3 {
            let mut amps = [C64::new(0.0, 0.0); DIM];
            for er in 0..2 {
                for eu in 0..2 {
                    amps[basis_index(er, eu)] =
                        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
            let v = SMatrix::<C64, 9, 1>::from_column_slice(&amps);
            let w: f64 = rng.random();
            m += v * v.adjoint() * c(w);
            total += (v.adjoint() * v)[(0, 0)].re * w;
        }
        DensityState::new(m / c(total)).unwrap()
    }

    /// Lindblad dissipator applied directly: Σ r (cρc† − ½c†cρ − ½ρc†c).
    fn direct_dissipator(rates: &DissipationRates, rho: &Op) -> Op {
        let mut out = Op::zeros();
        for (r, op) in rates.jump_operators() {
            let cdc = op.adjoint() * op;
            out += (op * rho * op.adjoint() - (cdc * rho + rho * cdc) * c(0.5)) * c(r);
        }
        out
    }

    #[test]
    fn zero_rates_give_zero_l1() {
        let pulse = PulseSpec::new(Ion::Eu, Spin::Up, PI, omega());
        let l = build_liouvillian(&[pulse], DNU, &DissipationRates::zero()).unwrap();
        assert!(l.l1.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rejects_simultaneous_drives() {
        let a = PulseSpec::new(Ion::Eu, Spin::Up, PI, omega());
        let b = PulseSpec::new(Ion::Er, Spin::Up, PI, omega());
        assert_eq!(
            build_liouvillian(&[a, b], DNU, &DissipationRates::nominal()).unwrap_err(),
            LindbladError::MultipleDrives(2)
        );
    }

    #[test]
    fn undriven_diagonal_state_is_stationary() {
        let l = build_liouvillian(&[], DNU, &DissipationRates::zero()).unwrap();
        let rho = DensityState::basis(EXCITED, EXCITED);
        let d = apply_superop(&l.l0, &rho);
        assert!(d.matrix().iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn l1_matches_direct_dissipator_and_is_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rates = DissipationRates::nominal().scaled(10.0, 3.0, 2.0);
        let pulse = PulseSpec::new(Ion::Er, Spin::Up, PI, omega());
        let l = build_liouvillian(&[pulse], DNU, &rates).unwrap();
        for _ in 0..20 {
            let rho = random_state(&mut rng);
            let via_super = apply_superop(&l.l1, &rho);
            let direct = direct_dissipator(&rates, rho.matrix());
            let diff = (via_super.matrix() - direct).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-10, "diff {diff}");
            assert!(via_super.trace().norm() < 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(32);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-13);
        // ∫ x^62 over [-1,1] = 2/63, exact for 32 nodes.
        let moment: f64 = rule.iter().map(|(x, w)| w * x.powi(62)).sum();
        assert!((moment - 2.0 / 63.0).abs() < 1e-13);
        let small = gauss_legendre(1);
        assert!(small[0].0.abs() < 1e-15 && (small[0].1 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_without_dissipation_is_unitary_channel() {
        let pulse = PulseSpec::new(Ion::Eu, Spin::Down, PI + 0.1, omega());
        let r = rotation_superop(&pulse, DNU, &DissipationRates::zero(), &Default::default())
            .unwrap();
        let h = hamiltonian(&[pulse], DNU).unwrap();
        let expected = unitary_superop(&propagator(&h, pulse.duration()));
        let diff = (&r.superop - expected).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn resonant_pi_pulse_transfers_population() {
        let pulse = PulseSpec::new(Ion::Er, Spin::Up, PI, omega());
        let rho0 = DensityState::basis(0, 0);
        let r = rotation_superop(&pulse, 0.0, &DissipationRates::nominal(), &Default::default())
            .unwrap();
        let out = apply_superop(&r.superop, &rho0);
        let excited = out.population(EXCITED, 0);
        // Loss is first order in the rates over one pulse.
        let loss_bound = 2.0 * DissipationRates::nominal().max_rate() * pulse.duration();
        assert!(excited > 1.0 - loss_bound, "excited {excited}");
    }

    #[test]
    fn detuned_pulse_makes_effective_two_pi_with_phase() {
        // Er excited, Eu in ↑: the Eu↑ pulse is detuned by Δν and returns the
        // population. Cross-checked between the two routes.
        let pulse = PulseSpec::new(Ion::Eu, Spin::Up, PI, omega());
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = [C64::new(0.0, 0.0); DIM];
        amps[basis_index(EXCITED, 0)] = c(half);
        amps[basis_index(EXCITED, 1)] = c(half);
        let rho0 = DensityState::from_pure(&amps).unwrap();
        let zero = DissipationRates::zero();
        let exact = evolve_exact(&rho0, &[pulse], DNU, &zero, &Default::default()).unwrap();
        let pert =
            evolve_perturbative(&rho0, &[pulse], DNU, &zero, &Default::default()).unwrap();
        assert!(exact.trace_distance(&pert) < 1e-8);
        assert!((exact.population(EXCITED, 0) - 0.5).abs() < 1e-9);
        // ρ_{e↑, e↓} picks up the phase of the ↑ amplitude, −1·e^{−iπ√3/2}.
        let coh = exact.matrix()[(basis_index(EXCITED, 0), basis_index(EXCITED, 1))];
        let want = PI * (2.0 - 3f64.sqrt()) / 2.0;
        assert!((coh.arg() - want).abs() < 1e-8, "phase {}", coh.arg());
    }

    #[test]
    fn exact_matches_rotation_for_single_pulse_without_dissipation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zero = DissipationRates::zero();
        for (ion, spin) in [(Ion::Er, Spin::Up), (Ion::Eu, Spin::Up), (Ion::Eu, Spin::Down)] {
            let pulse = PulseSpec::new(ion, spin, PI, omega());
            let rho0 = random_state(&mut rng);
            let a = evolve_exact(&rho0, &[pulse], DNU, &zero, &Default::default()).unwrap();
            let b = evolve_perturbative(&rho0, &[pulse], DNU, &zero, &Default::default())
                .unwrap();
            assert!(a.trace_distance(&b) < 1e-8);
        }
    }

    #[test]
    fn exact_agrees_with_matrix_exponential_of_full_generator() {
        let rates = DissipationRates::nominal().scaled(50.0, 50.0, 50.0);
        let pulse = PulseSpec::new(Ion::Eu, Spin::Up, PI + 0.05, omega());
        let rho0 = DensityState::product([c(0.6), c(0.8)], [c(0.8), c(-0.6)]).unwrap();
        let l = build_liouvillian(&[pulse], DNU, &rates).unwrap();
        let expm = (l.full() * C64::new(pulse.duration(), 0.0)).exp();
        let reference = apply_superop(&expm, &rho0);
        let exact = evolve_exact(&rho0, &[pulse], DNU, &rates, &Default::default()).unwrap();
        assert!(exact.trace_distance(&reference) < 1e-9);
    }

    #[test]
    fn empty_sequence_is_identity() {
        let rho0 = DensityState::product([c(0.6), c(0.8)], [c(1.0), c(0.0)]).unwrap();
        let out = evolve_exact(&rho0, &[], DNU, &DissipationRates::nominal(), &Default::default())
            .unwrap();
        assert_eq!(out, rho0);
    }

    #[test]
    fn channels_preserve_trace_and_hermiticity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rates = DissipationRates::nominal().scaled(20.0, 20.0, 20.0);
        for _ in 0..10 {
            let ion = if rng.random::<bool>() { Ion::Er } else { Ion::Eu };
            let spin = if rng.random::<bool>() { Spin::Up } else { Spin::Down };
            let pulse = PulseSpec::new(ion, spin, rng.random_range(0.1..2.0 * PI), omega());
            let r = rotation_superop(&pulse, DNU, &rates, &Default::default()).unwrap();
            let rho = random_state(&mut rng);
            let out = apply_superop(&r.superop, &rho);
            assert!((out.trace() - c(1.0)).norm() < 1e-9);
            assert!(out.hermiticity_error() < 1e-10);
        }
    }

    #[test]
    fn unitary_evolution_conserves_purity() {
        let rho0 = DensityState::product([c(0.6), c(0.8)], [c(0.8), c(0.6)]).unwrap();
        let seq: Vec<_> = [
            (Ion::Er, Spin::Up),
            (Ion::Eu, Spin::Up),
            (Ion::Eu, Spin::Down),
            (Ion::Er, Spin::Down),
        ]
        .iter()
        .map(|&(i, s)| PulseSpec::new(i, s, 1.3, omega()))
        .collect();
        let out = evolve_exact(&rho0, &seq, DNU, &DissipationRates::zero(), &Default::default())
            .unwrap();
        assert!((out.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_validation_catches_bad_states() {
        let mut m = Op::zeros();
        m[(0, 0)] = c(0.5);
        assert!(matches!(DensityState::new(m), Err(LindbladError::Trace(_))));
        m[(1, 1)] = c(0.5);
        m[(0, 1)] = c(0.1);
        assert!(matches!(DensityState::new(m), Err(LindbladError::NotHermitian(_))));
        let mut neg = Op::zeros();
        neg[(0, 0)] = c(1.5);
        neg[(1, 1)] = c(-0.5);
        assert!(matches!(DensityState::new(neg), Err(LindbladError::NotPositive(_))));
    }

    #[test]
    fn step_failure_names_the_pulse() {
        let pulse = PulseSpec::new(Ion::Er, Spin::Up, PI, omega());
        let rho0 = DensityState::basis(0, 0);
        let opts = ExactOptions {
            max_steps: 3,
            ..Default::default()
        };
        let err = evolve_exact(&rho0, &[pulse, pulse], DNU, &DissipationRates::nominal(), &opts)
            .unwrap_err();
        assert!(matches!(err, LindbladError::StepSize { pulse_index: 0, .. }));
    }
}
